"""Optional SVG renderings of the exported analytics families.

Byte-determinism is preserved by pinning matplotlib's SVG hash salt and
stripping the date metadata, so chart re-renders diff clean.
"""

from pathlib import Path

_FIELD_STYLES = {"cs": "-", "math": "--", "physics": ":"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "paperlinks"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _line_chart(plt, rows, value_key, title, ylabel, path, link_class):
    fig, ax = plt.subplots(figsize=(6, 4))
    fields = sorted({r["field"] for r in rows})
    for field in fields:
        points = [
            (r["year"], r[value_key])
            for r in rows
            if r["field"] == field and r.get("link_class", link_class) == link_class
            and r[value_key] is not None
        ]
        if not points:
            continue
        xs, ys = zip(*sorted(points))
        ax.plot(xs, ys, _FIELD_STYLES.get(field, "-"), label=field)
    ax.set_title(title)
    ax.set_xlabel("year")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def _heatmap(plt, rows, field, link_class, path):
    years = sorted({r["year"] for r in rows})
    grid = [
        next(r["bins"] for r in rows if r["year"] == y)
        for y in years
    ]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(grid, aspect="auto", cmap="viridis")
    ax.set_yticks(range(len(years)), [str(y) for y in years])
    ax.set_xticks(range(10), [f"{10 * (i + 1)}%" for i in range(10)])
    ax.set_title(f"{link_class} link positions, {field}")
    ax.set_xlabel("position decile")
    ax.set_ylabel("year")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def render_charts(analytics_data, reports_dir):
    plt = _pyplot()
    reports_dir = Path(reports_dir)
    count = 0
    for link_class in ("data", "methods"):
        _line_chart(
            plt, analytics_data["usage"], "mentions_per_paper",
            f"{link_class} links per paper", "mentions per paper",
            reports_dir / f"fig1_usage_{link_class}.svg", link_class)
        _line_chart(
            plt, analytics_data["gini"], "gini",
            f"domain concentration of {link_class} links", "Gini",
            reports_dir / f"fig2_gini_{link_class}.svg", link_class)
        _line_chart(
            plt, analytics_data["liveness"], "alive_proportion",
            f"{link_class} links alive", "alive proportion",
            reports_dir / f"fig19_liveness_{link_class}.svg", link_class)
        count += 3
        fields = sorted({r["field"] for r in analytics_data["positions"]})
        for field in fields:
            rows = [
                r for r in analytics_data["positions"]
                if r["field"] == field and r["link_class"] == link_class
            ]
            if any(not r["empty"] for r in rows):
                _heatmap(plt, rows, field, link_class,
                         reports_dir / f"fig4_positions_{link_class}_{field}.svg")
                count += 1
    return count
