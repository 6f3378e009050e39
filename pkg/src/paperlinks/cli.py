"""Command-line entry points.

Every pipeline stage is independently invocable; ``all`` runs the whole
chain. Settings come from an optional flat key=value config file with CLI
flags taking precedence. Exit codes: 0 success, 1 usage error, 2 data
error, 3 stage-ordering error.
"""

import sys
from pathlib import Path

import click

from .pipeline import (
    STAGES,
    DataError,
    LockedOutputError,
    OutputLock,
    PipelineConfig,
    StageOrderError,
    load_config_file,
    run_stage,
)
from .probe import ProbeConfig

_CONFIG_KEYS = {
    "corpus_dir", "metadata", "out_dir", "classifier", "classifier_command",
    "transport", "analysis_year", "timeout", "domain_wait", "max_redirects",
    "max_domains", "user_agent", "svg", "top_k",
}


def _build_config(ctx):
    opts = ctx.obj
    values = {}
    if opts["config"]:
        values = load_config_file(opts["config"])
        unknown = set(values) - _CONFIG_KEYS
        if unknown:
            raise DataError(
                f"unknown config key(s): {', '.join(sorted(unknown))}")

    def pick(flag, key, fallback=None):
        if opts.get(flag) is not None:
            return opts[flag]
        return values.get(key, fallback)

    corpus_dir = pick("corpus", "corpus_dir")
    metadata = pick("metadata", "metadata")
    out_dir = pick("out", "out_dir", "out")
    if corpus_dir is None or metadata is None:
        raise click.UsageError(
            "corpus directory and metadata file are required "
            "(--corpus/--metadata or config file)")

    probe_cfg = ProbeConfig(
        timeout_seconds=float(pick("timeout", "timeout", 120.0)),
        domain_wait_seconds=float(pick("domain_wait", "domain_wait", 6.0)),
        max_redirects=int(pick("max_redirects", "max_redirects", 10)),
        max_concurrent_domains=int(pick("max_domains", "max_domains", 8)),
        user_agent=str(pick("user_agent", "user_agent",
                            "paperlinks-probe/0.1")),
    )
    analysis_year = pick("analysis_year", "analysis_year")
    svg = pick("svg", "svg", False)
    if isinstance(svg, str):
        svg = svg.lower() in ("1", "true", "yes")
    cfg = PipelineConfig(
        corpus_dir=Path(corpus_dir),
        metadata_path=Path(metadata),
        out_dir=Path(out_dir),
        classifier=str(pick("classifier", "classifier", "lexicon")),
        classifier_command=str(pick("classifier_command",
                                    "classifier_command", "")),
        transport=str(pick("transport", "transport", "real")),
        probe=probe_cfg,
        force=set(opts["force"]),
        svg=bool(svg),
        top_k=int(pick("top_k", "top_k", 10)),
    )
    if analysis_year is not None:
        cfg.analysis_year = int(analysis_year)
    cfg.validate()
    return cfg


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              help="Flat key=value config file.")
@click.option("--corpus", type=click.Path(file_okay=False),
              help="Directory of <paper_id>.tex sources.")
@click.option("--metadata", type=click.Path(dir_okay=False),
              help="Line-delimited paper metadata file.")
@click.option("--out", type=click.Path(file_okay=False),
              help="Output directory for the intermediate store and reports.")
@click.option("--force", multiple=True,
              type=click.Choice(STAGES + ("all",)),
              help="Re-run a stage even when its inputs are unchanged.")
@click.option("--classifier", type=click.Choice(["lexicon", "external"]),
              default=None, help="Mention classifier backend.")
@click.option("--classifier-command", default=None,
              help="Command line of the external classifier process.")
@click.option("--transport", default=None,
              help="'real' or 'replay:<rules.json>' for offline probing.")
@click.option("--analysis-year", type=int, default=None,
              help="Reference year for paper-age covariates.")
@click.option("--timeout", type=float, default=None,
              help="Probe timeout in seconds.")
@click.option("--domain-wait", type=float, default=None,
              help="Minimum seconds between requests to one domain.")
@click.option("--max-redirects", type=int, default=None)
@click.option("--max-domains", type=int, default=None,
              help="Concurrent domain limit while probing.")
@click.option("--user-agent", default=None)
@click.option("--svg", is_flag=True, default=None,
              help="Also render SVG charts with the reports.")
@click.option("--top-k", type=int, default=None,
              help="Rows per top-domains/top-URLs export.")
@click.pass_context
def cli(ctx, **opts):
    """Mine, classify, probe, and analyze URL mentions in a LaTeX corpus."""
    ctx.obj = opts


def _run(ctx, stages):
    cfg = _build_config(ctx)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    with OutputLock(cfg.out_dir):
        for stage in stages:
            skipped, report = run_stage(stage, cfg)
            status = "skipped (up to date)" if skipped else "done"
            click.echo(f"[{stage}] {status} {_brief(report)}")


def _brief(report):
    return " ".join(f"{k}={v}" for k, v in report.items())


def _stage_command(stage):
    @cli.command(name=stage, help=f"Run the {stage} stage.")
    @click.pass_context
    def _cmd(ctx):
        _run(ctx, [stage])

    return _cmd


for _stage in STAGES:
    _stage_command(_stage)


@cli.command(name="all", help="Run the full pipeline in order.")
@click.pass_context
def cmd_all(ctx):
    _run(ctx, list(STAGES))


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except StageOrderError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except LockedOutputError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
