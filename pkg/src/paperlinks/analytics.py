"""Descriptive statistics over the classified, probed mention corpus.

Everything here is a pure fold over the joined mention table; each operation
has an independent brute-force oracle in the test suite, so implementations
are free to use the efficient form (e.g. the sorted Gini identity) as long
as they match the definitional one.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from math import ceil

from .classify import CLASS_ORDER, LinkClass


@dataclass(frozen=True)
class MentionRow:
    paper_id: str
    canonical: str
    domain: str
    link_class: LinkClass
    section: str
    paragraph_index: int
    paragraph_count: int
    in_footnote: bool
    year: int
    field: object            # ingest.Field
    citation_count: int
    final_status: object     # int, error-kind string, or None when unprobed
    alive: object            # bool, or None when unprobed
    reused: object = None    # filled by mark_reuse

    @property
    def position_fraction(self):
        return self.paragraph_index / self.paragraph_count


@dataclass
class MentionTable:
    papers: list             # PaperMeta, all papers incl. link-free ones
    rows: list               # MentionRow
    introductions: dict = None  # canonical -> introducing paper_id

    def paper_by_id(self):
        return {p.paper_id: p for p in self.papers}

    def years(self):
        return sorted({p.year for p in self.papers})


def build_mention_table(papers, classified, probes):
    """Join classified mentions with paper metadata and probe outcomes.

    Every mention must join to exactly one paper; mentions whose URL was
    never probed (unprobeable scheme, or probing skipped) carry None for the
    probe columns as an explicit unprobed marker.
    """
    by_id = {p.paper_id: p for p in papers}
    rows = []
    for cm in classified:
        m = cm.mention
        paper = by_id.get(m.paper_id)
        if paper is None:
            raise ValueError(f"mention references unknown paper {m.paper_id!r}")
        result = probes.get(m.normalized.canonical) if probes else None
        rows.append(
            MentionRow(
                paper_id=m.paper_id,
                canonical=m.normalized.canonical,
                domain=m.normalized.domain,
                link_class=cm.link_class,
                section=m.section_heading,
                paragraph_index=m.paragraph_index,
                paragraph_count=m.paragraph_count,
                in_footnote=m.in_footnote,
                year=paper.year,
                field=paper.field,
                citation_count=paper.citation_count,
                final_status=result.final_status if result else None,
                alive=result.alive if result else None,
            )
        )
    return MentionTable(list(papers), rows)


def _match(row, year=None, field=None, link_class=None):
    if year is not None and row.year != year:
        return False
    if field is not None and row.field != field:
        return False
    if link_class is not None and row.link_class != link_class:
        return False
    return True


def _filtered(table, **kw):
    return [r for r in table.rows if _match(r, **kw)]


# ---------------------------------------------------------------------------
# Summary table
# ---------------------------------------------------------------------------

@dataclass
class SummaryRow:
    papers: int
    papers_with_links: int
    mentions: dict   # LinkClass -> mention count
    unique: dict     # LinkClass -> unique canonical count

    @property
    def total_mentions(self):
        return sum(self.mentions.values())


def summary_table(table):
    """Per-field paper and link counts with per-class unique URL counts.

    Unique counts key on canonical URL within (field, class); the Total row
    is the column sum of the per-field rows.
    """
    fields = sorted({p.field for p in table.papers}, key=lambda f: f.value)
    out = {}
    for f in fields:
        papers = [p for p in table.papers if p.field == f]
        rows = _filtered(table, field=f)
        linked = {r.paper_id for r in rows}
        mentions = {c: 0 for c in CLASS_ORDER}
        uniques = {c: set() for c in CLASS_ORDER}
        for r in rows:
            mentions[r.link_class] += 1
            uniques[r.link_class].add(r.canonical)
        out[f] = SummaryRow(
            papers=len(papers),
            papers_with_links=len(linked),
            mentions=mentions,
            unique={c: len(s) for c, s in uniques.items()},
        )
    out["total"] = SummaryRow(
        papers=sum(r.papers for r in out.values()),
        papers_with_links=sum(r.papers_with_links for r in out.values()),
        mentions={
            c: sum(r.mentions[c] for r in out.values()) for c in CLASS_ORDER
        },
        unique={
            c: sum(r.unique[c] for r in out.values()) for c in CLASS_ORDER
        },
    )
    return out


# ---------------------------------------------------------------------------
# Usage, proportions, reuse
# ---------------------------------------------------------------------------

def mentions_per_paper(table, year, field, link_class):
    """Average class mentions per paper of (year, field), counting papers
    with no links in the denominator. None when the cell has no papers."""
    papers = [p for p in table.papers if p.year == year and p.field == field]
    if not papers:
        return None
    count = len(_filtered(table, year=year, field=field, link_class=link_class))
    return count / len(papers)


def class_proportions(table, year, field):
    """(data, methods, supplement) shares of the cell's mentions; None for
    an empty cell."""
    rows = _filtered(table, year=year, field=field)
    if not rows:
        return None
    counts = Counter(r.link_class for r in rows)
    n = len(rows)
    return tuple(counts.get(c, 0) / n for c in CLASS_ORDER)


def mark_reuse(table):
    """Flag each mention as a reuse and record each URL's introduction paper.

    The introduction paper of a canonical URL is its earliest-dated
    mentioning paper (ties to the lexicographically smallest paper_id); any
    mention from a different paper is a reuse.
    """
    by_id = table.paper_by_id()
    introducer = {}
    for r in table.rows:
        paper = by_id[r.paper_id]
        key = (paper.submit_date, paper.paper_id)
        if r.canonical not in introducer or key < introducer[r.canonical]:
            introducer[r.canonical] = key
    introductions = {c: key[1] for c, key in introducer.items()}
    rows = [
        replace(r, reused=introductions[r.canonical] != r.paper_id)
        for r in table.rows
    ]
    return MentionTable(table.papers, rows, introductions)


def reused_links_per_paper(table, year, field, link_class):
    """Average count of unique reused URLs per paper of (year, field),
    counted within the given class. Requires a mark_reuse'd table."""
    papers = [p for p in table.papers if p.year == year and p.field == field]
    if not papers:
        return None
    per_paper = defaultdict(set)
    for r in _filtered(table, year=year, field=field, link_class=link_class):
        if r.reused:
            per_paper[r.paper_id].add(r.canonical)
    return sum(len(s) for s in per_paper.values()) / len(papers)


def reuse_proportion(table, year, field, link_class=None):
    """Share of the cell's mentions that reuse a previously introduced URL."""
    rows = _filtered(table, year=year, field=field, link_class=link_class)
    if not rows:
        return None
    return sum(1 for r in rows if r.reused) / len(rows)


# ---------------------------------------------------------------------------
# Concentration
# ---------------------------------------------------------------------------

def gini(counts):
    """Gini coefficient of a positive count vector.

    Computed with the sorted identity G = 2*sum(i*x_i)/(n*sum(x)) - (n+1)/n,
    which equals the pairwise mean-absolute-difference definition.
    """
    counts = list(counts)
    if not counts:
        raise ValueError("gini of an empty count vector is undefined")
    if any(c <= 0 for c in counts):
        raise ValueError("gini requires positive counts")
    n = len(counts)
    total = sum(counts)
    weighted = sum((i + 1) * x for i, x in enumerate(sorted(counts)))
    return 2.0 * weighted / (n * total) - (n + 1) / n


def domain_gini(table, year, field, link_class, by_host=False):
    """Gini of mention counts over observed registrable domains in the cell.

    by_host switches the grouping unit from eTLD+1 to the full hostname.
    """
    rows = _filtered(table, year=year, field=field, link_class=link_class)
    if not rows:
        return None
    if by_host:
        from .extract import normalize_url

        counts = Counter(normalize_url(r.canonical).host for r in rows)
    else:
        counts = Counter(r.domain for r in rows)
    return gini(counts.values())


def top_percentile_share(table, year_range, field, link_class, p):
    """Share of the cell's mentions captured by the top ceil(p% of unique
    URLs), ranked by mention count (ties by canonical URL)."""
    rows = [
        r for r in _filtered(table, field=field, link_class=link_class)
        if year_range is None or year_range[0] <= r.year <= year_range[1]
    ]
    if not rows:
        return None
    counts = Counter(r.canonical for r in rows)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    k = ceil(p * len(ranked) / 100)
    top = sum(count for _, count in ranked[:k])
    return top / len(rows)


# ---------------------------------------------------------------------------
# Positions, liveness, top-k
# ---------------------------------------------------------------------------

def position_bin(position_fraction):
    """Decile bin of a paragraph-position fraction, clamped to 0..9."""
    return min(int(position_fraction * 10), 9)


@dataclass
class HeatmapRow:
    year: int
    bins: list    # 10 shares summing to 1, or zeros when empty
    empty: bool


def position_heatmap(table, field, link_class):
    """Per-year distribution of a class's mentions over position deciles."""
    rows_by_year = defaultdict(list)
    for r in _filtered(table, field=field, link_class=link_class):
        rows_by_year[r.year].append(r)
    out = []
    for year in table.years():
        rows = rows_by_year.get(year, [])
        bins = [0] * 10
        for r in rows:
            bins[position_bin(r.position_fraction)] += 1
        if rows:
            out.append(HeatmapRow(year, [b / len(rows) for b in bins], False))
        else:
            out.append(HeatmapRow(year, [0.0] * 10, True))
    return out


def alive_proportion_by_year(table, field, link_class):
    """year -> share of probed mentions that are alive; years with zero
    probed mentions are absent."""
    probed = defaultdict(list)
    for r in _filtered(table, field=field, link_class=link_class):
        if r.alive is not None:
            probed[r.year].append(r.alive)
    return {
        year: sum(1 for a in flags if a) / len(flags)
        for year, flags in sorted(probed.items())
    }


def top_k(table, group, k, year=None, field=None, link_class=None):
    """Most-mentioned domains or URLs in a cell, descending with
    lexicographic tie-break, at most k rows."""
    if group not in ("domain", "url"):
        raise ValueError("group must be 'domain' or 'url'")
    key = (lambda r: r.domain) if group == "domain" else (lambda r: r.canonical)
    counts = Counter(
        key(r) for r in _filtered(table, year=year, field=field, link_class=link_class)
    )
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
