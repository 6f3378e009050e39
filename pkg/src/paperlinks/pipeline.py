"""Pipeline orchestration: staged runs over a persistent line-delimited store.

Each stage reads the previous stage's files and writes its own atomically
(temp file + rename), with a manifest of input content hashes so unchanged
stages are skipped. Exports are byte-deterministic: stable sort keys
everywhere and no timestamps inside data files.
"""

import csv
import datetime
import hashlib
import io
import json
import os
import shlex
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from . import analytics as an
from . import regress as rg
from .classify import (
    CLASS_ORDER,
    ClassifiedMention,
    ExternalClassifier,
    LinkClass,
    classify_mentions_external,
    classify_mentions_lexicon,
)
from .extract import LinkMention, extract_mentions, mention_to_record, normalize_url
from .ingest import Field, MetadataError, load_metadata, parse_latex
from .probe import (
    ProbeCache,
    ProbeConfig,
    replay_transport,
    requests_transport,
)

STAGES = ("ingest", "extract", "classify", "probe", "analyze", "regress", "report")

_DEPS = {
    "ingest": (),
    "extract": ("ingest",),
    "classify": ("extract",),
    "probe": ("extract",),
    "analyze": ("ingest", "classify", "probe"),
    "regress": ("ingest", "classify", "probe"),
    "report": ("analyze", "regress"),
}

_OUTPUTS = {
    "ingest": ("papers.jsonl", "documents.jsonl"),
    "extract": ("mentions.jsonl",),
    "classify": ("classified.jsonl",),
    "probe": ("probes.jsonl",),
    "analyze": ("analytics.json",),
    "regress": ("regression.json",),
    "report": ("reports",),
}


class DataError(ValueError):
    """Bad input data: malformed records, missing files, empty designs."""


class StageOrderError(RuntimeError):
    """A stage was requested before its upstream outputs exist."""


class LockedOutputError(RuntimeError):
    """Another pipeline instance owns the output directory."""


@dataclass
class PipelineConfig:
    corpus_dir: Path
    metadata_path: Path
    out_dir: Path
    classifier: str = "lexicon"
    classifier_command: str = ""
    transport: str = "real"
    analysis_year: int = dc_field(default_factory=lambda: datetime.date.today().year)
    probe: ProbeConfig = dc_field(default_factory=ProbeConfig)
    force: set = dc_field(default_factory=set)
    svg: bool = False
    top_k: int = 10

    def validate(self):
        if not Path(self.metadata_path).is_file():
            raise DataError(f"metadata file not found: {self.metadata_path}")
        if not Path(self.corpus_dir).is_dir():
            raise DataError(f"corpus directory not found: {self.corpus_dir}")
        if self.classifier not in ("lexicon", "external"):
            raise DataError(f"unknown classifier mode {self.classifier!r}")
        if self.classifier == "external" and not self.classifier_command:
            raise DataError("external classifier mode needs classifier_command")
        if self.transport != "real" and not self.transport.startswith("replay:"):
            raise DataError(f"unknown transport {self.transport!r}")


def load_config_file(path):
    """Flat key = value config text; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


# ---------------------------------------------------------------------------
# Store helpers
# ---------------------------------------------------------------------------

def _atomic_write_text(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_jsonl(path, records):
    _atomic_write_text(
        path, "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    )


def _read_jsonl(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Manifest:
    def __init__(self, out_dir):
        self.path = Path(out_dir) / "manifest.json"
        try:
            self.entries = json.loads(self.path.read_text(encoding="utf-8"))
        except (FileNotFoundError, ValueError):
            self.entries = {}

    def stage_current(self, stage, inputs, params, out_dir):
        entry = self.entries.get(stage)
        if entry is None:
            return False
        if entry.get("params") != params:
            return False
        if set(entry.get("inputs", {})) != {str(p) for p in inputs}:
            return False
        for rel, digest in entry["inputs"].items():
            path = Path(out_dir) / rel if not os.path.isabs(rel) else Path(rel)
            if not path.exists() or _sha256(path) != digest:
                return False
        for rel in _OUTPUTS[stage]:
            if not (Path(out_dir) / rel).exists():
                return False
        return True

    def record(self, stage, inputs, params, report, out_dir):
        self.entries[stage] = {
            "inputs": {
                str(p): _sha256(Path(out_dir) / p if not os.path.isabs(p) else p)
                for p in inputs
            },
            "params": params,
            "report": report,
        }
        _atomic_write_text(
            self.path, json.dumps(self.entries, sort_keys=True, indent=2) + "\n"
        )


class OutputLock:
    """One pipeline instance owns the output directory."""

    def __init__(self, out_dir):
        self.path = Path(out_dir) / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockedOutputError(
                f"output directory is locked by another run ({self.path}); "
                "remove the lock file if that run is dead"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except FileNotFoundError:
            pass


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------

def _require(cfg, stage):
    for dep in _DEPS[stage]:
        for rel in _OUTPUTS[dep]:
            if not (Path(cfg.out_dir) / rel).exists():
                raise StageOrderError(
                    f"stage {stage!r} needs output of {dep!r}; run {dep!r} first"
                )


def _document_to_record(doc):
    return {
        "paper_id": doc.paper_id,
        "sections": [
            {
                "heading": s.heading,
                "paragraphs": [
                    {
                        "text": p.text,
                        "footnote_spans": [list(sp) for sp in p.footnote_spans],
                        "link_spans": [[ls.start, ls.end, ls.kind] for ls in p.link_spans],
                    }
                    for p in s.paragraphs
                ],
            }
            for s in doc.sections
        ],
        "warnings": doc.warnings,
    }


def _document_from_record(rec):
    from .ingest import LinkSpan, Paragraph, ParsedDocument, Section

    sections = [
        Section(
            s["heading"],
            [
                Paragraph(
                    p["text"],
                    [tuple(sp) for sp in p["footnote_spans"]],
                    [LinkSpan(a, b, kind) for a, b, kind in p["link_spans"]],
                )
                for p in s["paragraphs"]
            ],
        )
        for s in rec["sections"]
    ]
    return ParsedDocument(rec["paper_id"], sections, rec.get("warnings", []))


def _paper_to_record(p):
    return {
        "paper_id": p.paper_id,
        "submit_date": p.submit_date.isoformat(),
        "field": p.field.value,
        "citation_count": p.citation_count,
    }


def _paper_from_record(rec):
    from .ingest import PaperMeta

    return PaperMeta(
        rec["paper_id"],
        datetime.date.fromisoformat(rec["submit_date"]),
        Field(rec["field"]),
        int(rec["citation_count"]),
    )


def stage_ingest(cfg):
    try:
        load = load_metadata(cfg.metadata_path)
    except MetadataError as exc:
        raise DataError(str(exc)) from exc
    papers = sorted(load.papers, key=lambda p: p.paper_id)
    docs = []
    warning_count = 0
    missing = []
    for paper in papers:
        tex = Path(cfg.corpus_dir) / f"{paper.paper_id}.tex"
        if not tex.is_file():
            missing.append(paper.paper_id)
            continue
        doc = parse_latex(tex.read_text(encoding="utf-8", errors="replace"),
                          paper.paper_id)
        warning_count += len(doc.warnings)
        docs.append(doc)
    if missing:
        raise DataError(
            f"{len(missing)} paper(s) have no .tex source, e.g. {missing[0]!r}"
        )
    _write_jsonl(Path(cfg.out_dir) / "papers.jsonl",
                 [_paper_to_record(p) for p in papers])
    _write_jsonl(Path(cfg.out_dir) / "documents.jsonl",
                 [_document_to_record(d) for d in docs])
    return {
        "papers": len(papers),
        "dropped_fields": dict(sorted(load.dropped.items())),
        "parse_warnings": warning_count,
    }


def stage_extract(cfg):
    docs = [_document_from_record(r)
            for r in _read_jsonl(Path(cfg.out_dir) / "documents.jsonl")]
    records = []
    rejected = 0
    for doc in docs:
        result = extract_mentions(doc)
        rejected += len(result.rejected)
        for m in result.mentions:
            records.append(mention_to_record(m))
    _write_jsonl(Path(cfg.out_dir) / "mentions.jsonl", records)
    return {"mentions": len(records), "rejected": rejected}


def _mention_from_record(rec):
    normalized = normalize_url(rec["canonical"])
    if normalized is None:
        raise DataError(f"stored canonical fails normalization: {rec['canonical']!r}")
    return LinkMention(
        paper_id=rec["paper_id"],
        url_raw=rec["url_raw"],
        context_sentence=rec["context_sentence"],
        section_heading=rec["section"],
        paragraph_index=int(rec["paragraph_index"]),
        paragraph_count=int(rec["paragraph_count"]),
        in_footnote=bool(rec["in_footnote"]),
        char_span=(0, 0),  # spans live in documents.jsonl, not the interchange file
        normalized=normalized,
    )


def stage_classify(cfg):
    records = _read_jsonl(Path(cfg.out_dir) / "mentions.jsonl")
    mentions = [_mention_from_record(r) for r in records]
    fallbacks = 0
    if cfg.classifier == "external":
        with ExternalClassifier(shlex.split(cfg.classifier_command)) as ext:
            classified = classify_mentions_external(mentions, ext)
            fallbacks = ext.fallback_count
    else:
        classified = classify_mentions_lexicon(mentions)
    out = []
    for rec, cm in zip(records, classified):
        rec = dict(rec)
        rec["link_class"] = cm.link_class.value
        rec["confidence"] = cm.confidence
        rec["classifier_id"] = cm.classifier_id
        out.append(rec)
    _write_jsonl(Path(cfg.out_dir) / "classified.jsonl", out)
    counts = {c.value: 0 for c in CLASS_ORDER}
    for cm in classified:
        counts[cm.link_class.value] += 1
    return {"classified": len(out), "by_class": counts, "fallbacks": fallbacks}


def _build_transport(cfg):
    if cfg.transport == "real":
        return requests_transport(cfg.probe.user_agent)
    return replay_transport(cfg.transport.split(":", 1)[1])


def stage_probe(cfg):
    from .probe import probe_all

    records = _read_jsonl(Path(cfg.out_dir) / "mentions.jsonl")
    urls = {}
    unprobeable = set()
    for rec in records:
        normalized = normalize_url(rec["canonical"])
        if normalized is None:
            continue
        if normalized.probeable:
            urls[normalized.canonical] = normalized
        else:
            unprobeable.add(normalized.canonical)
    cache = ProbeCache(Path(cfg.out_dir) / "probes.jsonl").load()
    cached_before = sum(1 for c in urls if c in cache.results)
    force = "probe" in cfg.force or "all" in cfg.force
    results = probe_all(
        urls.values(), cfg.probe, _build_transport(cfg), cache, force=force,
    )
    return {
        "unique_urls": len(urls),
        "already_cached": cached_before,
        "probed": len(urls) if force else len(urls) - cached_before,
        "unprobeable": len(unprobeable),
        "alive": sum(1 for r in results if r.alive),
    }


def _load_table(cfg):
    from .probe import ProbeResult

    papers = [_paper_from_record(r)
              for r in _read_jsonl(Path(cfg.out_dir) / "papers.jsonl")]
    classified = []
    for rec in _read_jsonl(Path(cfg.out_dir) / "classified.jsonl"):
        mention = _mention_from_record(rec)
        classified.append(
            ClassifiedMention(
                mention,
                LinkClass(rec["link_class"]),
                float(rec.get("confidence", 0.0)),
                rec.get("classifier_id", ""),
            )
        )
    probes = {}
    probes_path = Path(cfg.out_dir) / "probes.jsonl"
    if probes_path.exists():
        for rec in _read_jsonl(probes_path):
            result = ProbeResult.from_record(rec)
            probes[result.canonical] = result
    table = an.build_mention_table(papers, classified, probes)
    if papers:
        max_year = max(p.year for p in papers)
        if cfg.analysis_year < max_year:
            raise DataError(
                f"analysis_year {cfg.analysis_year} precedes the newest paper "
                f"({max_year})"
            )
    return an.mark_reuse(table)


_FIELDS = (Field.CS, Field.MATH, Field.PHYSICS)
_CLASS_VALUES = tuple(c.value for c in CLASS_ORDER)

# percentile grid exported for the concentration curve
_CONCENTRATION_PS = (1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)

_STATUS_DESCRIPTIONS = {
    "200": "Success",
    "404": "Not Found",
    "403": "Forbidden",
    "503": "Service unavailable",
    "429": "Too Many Requests",
    "500": "Internal server error",
    "ConnectionError": "A Connection error occurred",
    "SSLError": "A website cannot provide a secure connection",
    "ConnectTimeout": "The request timed out while trying to connect to the remote server",
    "ReadTimeout": "The server did not send any data in the allotted amount of time",
    "TooManyRedirects": "Redirect loop or chain exceeded the redirect limit",
}


def _year_grid(table):
    years = table.years()
    if not years:
        return []
    return list(range(min(years), max(years) + 1))


def compute_analytics(table, top_k=10):
    years = _year_grid(table)
    fields = [f for f in _FIELDS if any(p.field == f for p in table.papers)]

    summary = {}
    for key, row in an.summary_table(table).items():
        name = key if isinstance(key, str) else key.value
        summary[name] = {
            "papers": row.papers,
            "papers_with_links": row.papers_with_links,
            "mentions": {c.value: row.mentions[c] for c in CLASS_ORDER},
            "unique": {c.value: row.unique[c] for c in CLASS_ORDER},
        }

    # per-class rows plus an "all" row covering the all-links variants
    class_cells = [(c, c.value) for c in CLASS_ORDER] + [(None, "all")]

    alive_maps = {
        (f, c): an.alive_proportion_by_year(table, f, c)
        for f in fields for c in CLASS_ORDER
    }
    probed_counts = {}
    for r in table.rows:
        if r.alive is not None:
            key = (r.year, r.field, r.link_class)
            probed_counts[key] = probed_counts.get(key, 0) + 1

    usage = []
    reuse = []
    gini_rows = []
    liveness = []
    for year in years:
        for f in fields:
            for c, class_name in class_cells:
                usage.append({
                    "year": year, "field": f.value, "link_class": class_name,
                    "mentions_per_paper": an.mentions_per_paper(table, year, f, c),
                })
                reuse.append({
                    "year": year, "field": f.value, "link_class": class_name,
                    "reused_links_per_paper":
                        an.reused_links_per_paper(table, year, f, c),
                    "reuse_proportion": an.reuse_proportion(table, year, f, c),
                })
                gini_rows.append({
                    "year": year, "field": f.value, "link_class": class_name,
                    "gini": an.domain_gini(table, year, f, c),
                })
            for c in CLASS_ORDER:
                liveness.append({
                    "year": year, "field": f.value, "link_class": c.value,
                    "alive_proportion": alive_maps[(f, c)].get(year),
                    "probed_mentions": probed_counts.get((year, f, c), 0),
                })

    proportions = []
    for year in years:
        for f in fields:
            shares = an.class_proportions(table, year, f)
            proportions.append({
                "year": year, "field": f.value,
                "data_share": shares[0] if shares else None,
                "methods_share": shares[1] if shares else None,
                "supplement_share": shares[2] if shares else None,
            })

    positions = []
    for f in fields:
        for c in CLASS_ORDER:
            for row in an.position_heatmap(table, f, c):
                positions.append({
                    "field": f.value, "link_class": c.value, "year": row.year,
                    "bins": row.bins, "empty": row.empty,
                })

    concentration = []
    year_range = (years[0], years[-1]) if years else None
    for f in fields:
        for c, class_name in class_cells:
            for p in _CONCENTRATION_PS:
                concentration.append({
                    "field": f.value, "link_class": class_name, "p_percent": p,
                    "top_share":
                        an.top_percentile_share(table, year_range, f, c, p),
                    "year_start": year_range[0] if year_range else None,
                    "year_end": year_range[-1] if year_range else None,
                })

    top_domains = []
    top_urls = []
    for f in fields:
        for c in CLASS_ORDER:
            for rank, (domain, count) in enumerate(
                    an.top_k(table, "domain", top_k, field=f, link_class=c), 1):
                top_domains.append({
                    "field": f.value, "link_class": c.value, "rank": rank,
                    "domain": domain, "mentions": count,
                })
            for rank, (url, count) in enumerate(
                    an.top_k(table, "url", top_k, field=f, link_class=c), 1):
                top_urls.append({
                    "field": f.value, "link_class": c.value, "rank": rank,
                    "url": url, "mentions": count,
                })

    tally = {}
    seen = set()
    for r in table.rows:
        if r.final_status is None or r.canonical in seen:
            continue
        seen.add(r.canonical)
        key = str(r.final_status)
        tally[key] = tally.get(key, 0) + 1
    total = sum(tally.values())
    status_tally = [
        {
            "status": status,
            "description": _STATUS_DESCRIPTIONS.get(
                status, f"HTTP status {status}"),
            "links": count,
            "proportion": count / total if total else None,
        }
        for status, count in sorted(
            tally.items(), key=lambda kv: (-kv[1], kv[0]))
    ]

    return {
        "summary": summary,
        "usage": usage,
        "proportions": proportions,
        "gini": gini_rows,
        "reuse": reuse,
        "positions": positions,
        "concentration": concentration,
        "liveness": liveness,
        "top_domains": top_domains,
        "top_urls": top_urls,
        "status_tally": status_tally,
    }


def stage_analyze(cfg):
    table = _load_table(cfg)
    data = compute_analytics(table, cfg.top_k)
    _atomic_write_text(
        Path(cfg.out_dir) / "analytics.json",
        json.dumps(data, sort_keys=True, indent=2) + "\n",
    )
    return {
        "mentions": len(table.rows),
        "papers": len(table.papers),
        "status_kinds": len(data["status_tally"]),
    }


def _fit_to_dict(fit):
    return {
        "columns": fit.columns,
        "beta": [float(v) for v in fit.beta],
        "se": [float(v) for v in fit.se],
        "z": [float(v) for v in fit.z],
        "p": [float(v) for v in fit.p],
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "alpha": fit.alpha,
        "alpha_se": fit.alpha_se,
        "diagnostics": fit.diagnostics,
    }


def stage_regress(cfg):
    table = _load_table(cfg)
    try:
        liveness_design = rg.build_liveness_design(table, cfg.analysis_year)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    citation_design = rg.build_citation_design(table.papers, table, cfg.analysis_year)
    liveness_fit = rg.fit_logistic(liveness_design)
    citation_fit = rg.fit_negbin(citation_design)
    effects = {
        name: {
            "rate_ratio_percent": rg.rate_ratio_percent(
                citation_fit.beta[citation_fit.columns.index(name)]),
        }
        for name in ("has_live_methods", "has_live_data",
                     "has_problematic_methods", "has_problematic_data")
    }
    effects.update({
        name: {
            "doubling_odds_percent": rg.doubling_odds_percent(
                liveness_fit.beta[liveness_fit.columns.index(name)]),
        }
        for name in ("log2_domain_mentions", "log2_url_mentions")
    })
    _atomic_write_text(
        Path(cfg.out_dir) / "regression.json",
        json.dumps(
            {
                "liveness": _fit_to_dict(liveness_fit),
                "citation": _fit_to_dict(citation_fit),
                "effects": effects,
                "analysis_year": cfg.analysis_year,
            },
            sort_keys=True, indent=2,
        ) + "\n",
    )
    return {
        "liveness_converged": liveness_fit.converged,
        "citation_converged": citation_fit.converged,
        "citation_alpha": citation_fit.alpha,
    }


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write_text(path, buf.getvalue())


def render_reports(analytics_data, regression_data, reports_dir):
    reports_dir = Path(reports_dir)
    reports_dir.mkdir(parents=True, exist_ok=True)

    summary = analytics_data["summary"]
    rows = []
    order = [f.value for f in _FIELDS if f.value in summary] + ["total"]
    for name in order:
        row = summary[name]
        rows.append([
            name, row["papers"], row["papers_with_links"],
            row["mentions"]["data"], row["unique"]["data"],
            row["mentions"]["methods"], row["unique"]["methods"],
            row["mentions"]["supplement"], row["unique"]["supplement"],
        ])
    _write_csv(
        reports_dir / "table1_summary.csv",
        ["field", "papers", "papers_with_links",
         "data_mentions", "data_unique", "methods_mentions", "methods_unique",
         "supplement_mentions", "supplement_unique"],
        rows,
    )

    _write_csv(
        reports_dir / "fig1_usage.csv",
        ["year", "field", "link_class", "mentions_per_paper"],
        [[r["year"], r["field"], r["link_class"], r["mentions_per_paper"]]
         for r in analytics_data["usage"]],
    )
    _write_csv(
        reports_dir / "fig2_gini.csv",
        ["year", "field", "link_class", "gini"],
        [[r["year"], r["field"], r["link_class"], r["gini"]]
         for r in analytics_data["gini"]],
    )
    _write_csv(
        reports_dir / "fig3_reuse.csv",
        ["year", "field", "link_class", "reused_links_per_paper",
         "reuse_proportion"],
        [[r["year"], r["field"], r["link_class"],
          r["reused_links_per_paper"], r["reuse_proportion"]]
         for r in analytics_data["reuse"]],
    )
    _write_csv(
        reports_dir / "fig4_positions.csv",
        ["field", "link_class", "year"]
        + [f"bin_{i}" for i in range(10)] + ["empty"],
        [[r["field"], r["link_class"], r["year"], *r["bins"], r["empty"]]
         for r in analytics_data["positions"]],
    )
    _write_csv(
        reports_dir / "fig11_proportions.csv",
        ["year", "field", "data_share", "methods_share", "supplement_share"],
        [[r["year"], r["field"], r["data_share"], r["methods_share"],
          r["supplement_share"]]
         for r in analytics_data["proportions"]],
    )
    _write_csv(
        reports_dir / "fig12_concentration.csv",
        ["field", "link_class", "p_percent", "top_share", "year_start",
         "year_end"],
        [[r["field"], r["link_class"], r["p_percent"], r["top_share"],
          r["year_start"], r["year_end"]]
         for r in analytics_data["concentration"]],
    )
    _write_csv(
        reports_dir / "fig19_liveness.csv",
        ["year", "field", "link_class", "alive_proportion", "probed_mentions"],
        [[r["year"], r["field"], r["link_class"], r["alive_proportion"],
          r["probed_mentions"]]
         for r in analytics_data["liveness"]],
    )
    _write_csv(
        reports_dir / "table4_status.csv",
        ["status", "description", "links", "proportion"],
        [[r["status"], r["description"], r["links"],
          f"{r['proportion'] * 100:.1f}%" if r["proportion"] is not None else "NA"]
         for r in analytics_data["status_tally"]],
    )
    _write_csv(
        reports_dir / "topk_domains.csv",
        ["field", "link_class", "rank", "domain", "mentions"],
        [[r["field"], r["link_class"], r["rank"], r["domain"], r["mentions"]]
         for r in analytics_data["top_domains"]],
    )
    _write_csv(
        reports_dir / "topk_urls.csv",
        ["field", "link_class", "rank", "url", "mentions"],
        [[r["field"], r["link_class"], r["rank"], r["url"], r["mentions"]]
         for r in analytics_data["top_urls"]],
    )

    for name, key in (("table5_liveness_fit.csv", "liveness"),
                      ("table6_citation_fit.csv", "citation")):
        fit = regression_data[key]
        rows = [
            [col, beta, se, z, p, rg.significance_stars(p)]
            for col, beta, se, z, p in zip(
                fit["columns"], fit["beta"], fit["se"], fit["z"], fit["p"])
        ]
        if fit.get("alpha") is not None:
            rows.append(["alpha", fit["alpha"], fit.get("alpha_se"), "", "", ""])
        rows.append(["log_likelihood", fit["log_likelihood"], "", "", "", ""])
        _write_csv(reports_dir / name,
                   ["name", "beta", "se", "z", "p", "stars"], rows)


def stage_report(cfg):
    analytics_data = json.loads(
        (Path(cfg.out_dir) / "analytics.json").read_text(encoding="utf-8"))
    regression_data = json.loads(
        (Path(cfg.out_dir) / "regression.json").read_text(encoding="utf-8"))
    reports_dir = Path(cfg.out_dir) / "reports"
    render_reports(analytics_data, regression_data, reports_dir)
    count = len(list(reports_dir.glob("*.csv")))
    if cfg.svg:
        from .charts import render_charts

        count += render_charts(analytics_data, reports_dir)
    return {"files": count}


_STAGE_FNS = {
    "ingest": stage_ingest,
    "extract": stage_extract,
    "classify": stage_classify,
    "probe": stage_probe,
    "analyze": stage_analyze,
    "regress": stage_regress,
    "report": stage_report,
}


def _stage_inputs(cfg, stage):
    if stage == "ingest":
        return [str(Path(cfg.metadata_path).resolve())]
    inputs = []
    for dep in _DEPS[stage]:
        inputs.extend(_OUTPUTS[dep])
    return inputs


def _corpus_digest(corpus_dir):
    """One hash over every .tex file's name and content, so editing any
    source invalidates the ingest stage."""
    digest = hashlib.sha256()
    for path in sorted(Path(corpus_dir).glob("*.tex")):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _stage_params(cfg, stage):
    params = {}
    if stage == "ingest":
        params["corpus_dir"] = str(Path(cfg.corpus_dir).resolve())
        params["corpus_digest"] = _corpus_digest(cfg.corpus_dir)
    if stage == "classify":
        params["classifier"] = cfg.classifier
        params["classifier_command"] = cfg.classifier_command
    if stage == "probe":
        params.update({
            "transport": cfg.transport,
            "timeout": cfg.probe.timeout_seconds,
            "domain_wait": cfg.probe.domain_wait_seconds,
            "max_redirects": cfg.probe.max_redirects,
        })
    if stage in ("analyze", "regress"):
        params["analysis_year"] = cfg.analysis_year
        params["top_k"] = cfg.top_k
    if stage == "report":
        params["svg"] = cfg.svg
    return params


def run_stage(stage, cfg):
    """Run one stage (skipping when the manifest proves it is current).

    Returns (skipped, report). Raises StageOrderError when upstream outputs
    are missing, DataError for bad inputs.
    """
    if stage not in _STAGE_FNS:
        raise ValueError(f"unknown stage {stage!r}")
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    _require(cfg, stage)
    manifest = Manifest(cfg.out_dir)
    inputs = _stage_inputs(cfg, stage)
    params = _stage_params(cfg, stage)
    forced = stage in cfg.force or "all" in cfg.force
    if not forced and manifest.stage_current(stage, inputs, params, cfg.out_dir):
        return True, manifest.entries[stage].get("report", {})
    report = _STAGE_FNS[stage](cfg)
    manifest.record(stage, inputs, params, report, cfg.out_dir)
    return False, report


def run_all(cfg):
    results = {}
    for stage in STAGES:
        results[stage] = run_stage(stage, cfg)
    return results
