"""Load paper metadata and turn flattened LaTeX sources into sectioned plain text.

The lexer here is purpose-built for URL mining: it keeps headings, paragraph
boundaries, footnote placement, and the contents of ``\\url``/``\\href``
commands, and it throws away everything typographic. It is not a TeX engine;
unbalanced input degrades to a best-effort parse with a warning instead of
failing, because corpus files are never uniformly well-formed.
"""

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from enum import Enum


class Field(str, Enum):
    CS = "cs"
    MATH = "math"
    PHYSICS = "physics"


# raw metadata tokens accepted into the analysis
_FIELD_TOKENS = {
    "cs": Field.CS,
    "math": Field.MATH,
    "physics": Field.PHYSICS,
}

FRONT_SECTION = "FRONT"
MATH_PLACEHOLDER = "[EQUATION]"


class MetadataError(ValueError):
    pass


@dataclass(frozen=True)
class PaperMeta:
    paper_id: str
    submit_date: date
    field: Field
    citation_count: int

    @property
    def year(self):
        return self.submit_date.year


@dataclass
class MetadataLoad:
    papers: list
    dropped: Counter  # raw field token -> count of dropped records

    @property
    def dropped_count(self):
        return sum(self.dropped.values())


@dataclass
class LinkSpan:
    """A \\url or \\href target surviving verbatim in the plain text."""

    start: int
    end: int
    kind: str  # "url" | "href"


@dataclass
class Paragraph:
    text: str
    footnote_spans: list = field(default_factory=list)  # (start, end) pairs
    link_spans: list = field(default_factory=list)      # LinkSpan


@dataclass
class Section:
    heading: str
    paragraphs: list


@dataclass
class ParsedDocument:
    paper_id: str
    sections: list
    warnings: list = field(default_factory=list)

    @property
    def paragraph_count(self):
        return sum(len(s.paragraphs) for s in self.sections)

    def iter_paragraphs(self):
        """Yield (global_paragraph_index, section_heading, paragraph) in order."""
        idx = 0
        for section in self.sections:
            for para in section.paragraphs:
                yield idx, section.heading, para
                idx += 1


def _parse_submit_date(raw):
    raw = str(raw).strip()
    if re.fullmatch(r"\d{4}", raw):
        return date(int(raw), 1, 1)
    return date.fromisoformat(raw)


def load_metadata(path):
    """Read the line-delimited metadata file into PaperMeta records.

    Records whose field is not cs/math/physics are dropped and counted, not
    errored: the corpus intentionally omits the smaller subject areas.
    """
    papers = []
    dropped = Counter()
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                paper_id = str(rec["paper_id"])
                submit_date = _parse_submit_date(rec["submit_date"])
                field_token = str(rec["field"]).strip().lower()
                citations = int(rec["citation_count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise MetadataError(f"line {lineno}: malformed metadata record ({exc})") from exc
            if citations < 0:
                raise MetadataError(f"line {lineno}: negative citation_count")
            if paper_id in seen:
                raise MetadataError(f"line {lineno}: duplicate paper_id {paper_id!r}")
            seen.add(paper_id)
            if field_token not in _FIELD_TOKENS:
                dropped[field_token] += 1
                continue
            papers.append(
                PaperMeta(paper_id, submit_date, _FIELD_TOKENS[field_token], citations)
            )
    return MetadataLoad(papers, dropped)


# ---------------------------------------------------------------------------
# LaTeX lexing
# ---------------------------------------------------------------------------

# commands whose single brace argument is ordinary text
_TEXT_COMMANDS = {
    "textbf", "textit", "texttt", "textsc", "textsf", "textrm", "textsl",
    "textmd", "textup", "textnormal", "emph", "text", "mbox", "hbox",
    "underline", "caption", "uppercase", "lowercase", "textsuperscript",
    "textsubscript",
}

# commands whose brace argument is dropped along with the command
_DROP_ARG_COMMANDS = {
    "cite", "citep", "citet", "citealp", "citealt", "citeauthor", "citeyear",
    "citenum", "parencite", "textcite", "ref", "eqref", "autoref", "cref",
    "Cref", "pageref", "label", "vspace", "hspace", "includegraphics",
    "bibliography", "bibliographystyle", "input", "include", "usepackage",
    "documentclass", "pagestyle", "thispagestyle", "hypersetup", "acks",
    "title", "author", "date", "thanks", "institute", "affiliation", "email",
    "orcid", "maketitle",
}

# two-argument commands where the first argument is dropped
_DROP1_KEEP1_COMMANDS = {"textcolor", "colorbox", "texorpdfstring"}

_DISPLAY_MATH_ENVS = {
    "equation", "align", "eqnarray", "displaymath", "gather", "multline",
    "alignat", "flalign", "math",
}

_DROP_ENVS = {
    "figure", "table", "tabular", "tikzpicture", "algorithm", "algorithmic",
    "algorithm2e", "lstlisting", "minted", "thebibliography", "filecontents",
    "comment",
}

_VERBATIM_ENVS = {"verbatim", "Verbatim", "alltt"}

_CHAR_ESCAPES = {
    "%": "%", "&": "&", "_": "_", "#": "#", "$": "$", "{": "{", "}": "}",
    "\\": " ", " ": " ", ",": " ", ";": " ", "~": " ", "/": "", "-": "",
    "!": "", ":": " ", "\n": " ",
}

_URL_COMMAND_RE = re.compile(r"\\(?:url|href)\s*\{")


def _find_comment_start(line):
    """Index of the first comment ``%`` on a line, or None.

    Percent signs escaped with a backslash or sitting inside a \\url/\\href
    brace group are not comments (URLs legitimately carry percent-encoding).
    """
    protected = []
    for m in _URL_COMMAND_RE.finditer(line):
        depth = 1
        j = m.end()
        while j < len(line) and depth:
            if line[j] == "{":
                depth += 1
            elif line[j] == "}":
                depth -= 1
            j += 1
        protected.append((m.start(), j))
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "%" and not any(s <= i < e for s, e in protected):
            return i
        i += 1
    return None


def strip_comments(source):
    """Remove unescaped ``%`` comments. Comment-only lines vanish entirely,
    matching LaTeX, where such lines do not end a paragraph."""
    out = []
    for line in source.split("\n"):
        cut = _find_comment_start(line)
        if cut is None:
            out.append(line)
            continue
        kept = line[:cut]
        if kept.strip():
            out.append(kept)
    return "\n".join(out)


class _Emitter:
    """Accumulates plain text, collapsing whitespace runs to single spaces,
    while recording footnote and URL spans in output coordinates."""

    def __init__(self):
        self.chars = []
        self.footnote_spans = []
        self.link_spans = []
        self.warnings = []

    @property
    def pos(self):
        return len(self.chars)

    def emit(self, text):
        for ch in text:
            if ch.isspace():
                if self.chars and self.chars[-1] != " ":
                    self.chars.append(" ")
            else:
                self.chars.append(ch)

    def emit_verbatim(self, text):
        self.chars.extend(text)

    def trimmed_span(self, start, end):
        while start < end and self.chars[start] == " ":
            start += 1
        while end > start and self.chars[end - 1] == " ":
            end -= 1
        return start, end

    def finish(self):
        text = "".join(self.chars)
        stripped = text.rstrip()
        cut = len(stripped)
        foot = [
            (s, min(e, cut)) for s, e in self.footnote_spans if s < cut
        ]
        links = [ls for ls in self.link_spans if ls.end <= cut]
        return stripped, foot, links


def _read_group(s, i):
    """Read a balanced ``{...}`` group starting at i. Returns
    (content_start, content_end, next_index, balanced)."""
    assert s[i] == "{"
    depth = 1
    j = i + 1
    while j < len(s):
        ch = s[j]
        if ch == "\\":
            j += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1, j, j + 1, True
        j += 1
    return i + 1, len(s), len(s), False


def _skip_ws(s, i):
    while i < len(s) and s[i] in " \t\n":
        i += 1
    return i


def _skip_optional_arg(s, i):
    j = _skip_ws(s, i)
    if j < len(s) and s[j] == "[":
        depth = 1
        j += 1
        while j < len(s) and depth:
            if s[j] == "[":
                depth += 1
            elif s[j] == "]":
                depth -= 1
            j += 1
        return j
    return i


def _scan(s, i, end, em):
    """Emit plain text for s[i:end]; returns the index after the region."""
    while i < end:
        ch = s[i]
        if ch == "\\":
            i = _handle_command(s, i, end, em)
        elif ch == "{":
            start, gend, nxt, balanced = _read_group(s, i)
            if not balanced:
                em.warnings.append("unbalanced braces")
            _scan(s, start, gend, em)
            i = nxt
        elif ch == "}":
            em.warnings.append("unbalanced braces")
            i += 1
        elif ch == "$":
            i = _handle_math_dollar(s, i, end, em)
        elif ch == "~":
            em.emit(" ")
            i += 1
        else:
            em.emit(ch)
            i += 1
    return i


def _handle_math_dollar(s, i, end, em):
    if i + 1 < end and s[i + 1] == "$":  # display math $$...$$
        close = s.find("$$", i + 2, end)
        if close == -1:
            em.warnings.append("unterminated display math")
            em.emit(" " + MATH_PLACEHOLDER + " ")
            return end
        em.emit(" " + MATH_PLACEHOLDER + " ")
        return close + 2
    close = i + 1
    while close < end:
        if s[close] == "$" and s[close - 1] != "\\":
            break
        close += 1
    if close >= end:
        em.warnings.append("unterminated inline math")
        _scan(s, i + 1, end, em)
        return end
    _scan(s, i + 1, close, em)
    return close + 1


def _find_env_end(s, i, end, env):
    m = re.compile(r"\\end\s*\{" + re.escape(env) + r"\}").search(s, i, end)
    if m is None:
        return end, end, False
    return m.start(), m.end(), True


def _handle_command(s, i, end, em):
    j = i + 1
    if j >= end:
        return end
    if not s[j].isalpha():
        if s[j] == "[":  # \[ ... \] display math
            m = re.compile(r"\\\]").search(s, j + 1, end)
            em.emit(" " + MATH_PLACEHOLDER + " ")
            if m is None:
                em.warnings.append("unterminated display math")
                return end
            return m.end()
        if s[j] == "(":  # \( ... \) inline math: keep contents
            m = re.compile(r"\\\)").search(s, j + 1, end)
            if m is None:
                em.warnings.append("unterminated inline math")
                return _scan(s, j + 1, end, em)
            _scan(s, j + 1, m.start(), em)
            return m.end()
        em.emit(_CHAR_ESCAPES.get(s[j], s[j]))
        return j + 1
    k = j
    while k < end and s[k].isalpha():
        k += 1
    name = s[j:k]
    if k < end and s[k] == "*":
        k += 1

    if name == "url":
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            start, gend, nxt, balanced = _read_group(s, k)
            if not balanced:
                em.warnings.append("unbalanced braces in \\url")
            out_start = em.pos
            # interior whitespace is a line-wrap artifact, never URL content
            em.emit_verbatim("".join(s[start:gend].split()))
            em.link_spans.append(LinkSpan(out_start, em.pos, "url"))
            return nxt
        return k
    if name == "href":
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            ustart, uend, nxt, balanced = _read_group(s, k)
            url_text = "".join(s[ustart:uend].split())
            nxt = _skip_ws(s, nxt)
            if nxt < end and s[nxt] == "{":
                tstart, tend, nxt2, balanced2 = _read_group(s, nxt)
                _scan(s, tstart, tend, em)
                nxt = nxt2
            em.emit(" <")
            out_start = em.pos
            em.emit_verbatim(url_text)
            em.link_spans.append(LinkSpan(out_start, em.pos, "href"))
            em.emit_verbatim(">")
            return nxt
        return k
    if name == "footnote":
        k = _skip_optional_arg(s, k)
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            start, gend, nxt, balanced = _read_group(s, k)
            if not balanced:
                em.warnings.append("unbalanced braces in \\footnote")
            em.emit(" ")
            out_start = em.pos
            _scan(s, start, gend, em)
            span = em.trimmed_span(out_start, em.pos)
            if span[1] > span[0]:
                em.footnote_spans.append(span)
            em.emit(" ")
            return nxt
        return k
    if name == "begin":
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            estart, eend, nxt, _ = _read_group(s, k)
            env = s[estart:eend].strip().rstrip("*")
            raw_env = s[estart:eend].strip()
            if env in _DISPLAY_MATH_ENVS:
                _, after, found = _find_env_end(s, nxt, end, raw_env)
                if not found:
                    em.warnings.append(f"unterminated environment {raw_env}")
                em.emit(" " + MATH_PLACEHOLDER + " ")
                return after
            if env in _DROP_ENVS:
                _, after, found = _find_env_end(s, nxt, end, raw_env)
                if not found:
                    em.warnings.append(f"unterminated environment {raw_env}")
                em.emit(" ")
                return after
            if raw_env in _VERBATIM_ENVS:
                body_end, after, found = _find_env_end(s, nxt, end, raw_env)
                em.emit(" ")
                em.emit_verbatim(s[nxt:body_end].strip())
                em.emit(" ")
                return after
            return nxt  # transparent environment: keep contents
        return k
    if name == "end":
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            _, _, nxt, _ = _read_group(s, k)
            em.emit(" ")
            return nxt
        return k
    if name == "item":
        k = _skip_optional_arg(s, k)
        em.emit(" ")
        return k
    if name in _TEXT_COMMANDS:
        k = _skip_optional_arg(s, k)
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            start, gend, nxt, balanced = _read_group(s, k)
            if not balanced:
                em.warnings.append("unbalanced braces")
            _scan(s, start, gend, em)
            return nxt
        return k
    if name in _DROP1_KEEP1_COMMANDS:
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            _, _, nxt, _ = _read_group(s, k)
            nxt = _skip_ws(s, nxt)
            if nxt < end and s[nxt] == "{":
                start, gend, nxt2, _ = _read_group(s, nxt)
                _scan(s, start, gend, em)
                return nxt2
            return nxt
        return k
    if name in _DROP_ARG_COMMANDS:
        k = _skip_optional_arg(s, k)
        k = _skip_optional_arg(s, k)
        k = _skip_ws(s, k)
        if k < end and s[k] == "{":
            _, _, nxt, _ = _read_group(s, k)
            return nxt
        return k
    # unknown command: drop the token, keep whatever argument text follows
    return k


_HEADING_RE = re.compile(r"\\(?:section|subsection)\*?\s*(?=\{)")
_BLANK_LINE_RE = re.compile(r"\n\s*\n")


def _emit_paragraph(source):
    em = _Emitter()
    _scan(source, 0, len(source), em)
    text, foot, links = em.finish()
    return Paragraph(text, foot, links), em.warnings


def _plain_heading(source):
    em = _Emitter()
    _scan(source, 0, len(source), em)
    text, _, _ = em.finish()
    return text


def parse_latex(source, paper_id):
    """Parse one flattened LaTeX file into sections of plain-text paragraphs.

    Comments go first so commented-out URLs never reach extraction; heading
    commands then delimit sections, with any preamble text collected under
    the FRONT pseudo-section; finally each blank-line-delimited block is
    lexed to plain text with footnote and URL spans tracked.
    """
    stripped = strip_comments(source)
    warnings = []

    # split into (heading, body) segments
    segments = []
    last_heading = FRONT_SECTION
    last_end = 0
    for m in _HEADING_RE.finditer(stripped):
        brace = stripped.find("{", m.end() - 1)
        hstart, hend, nxt, balanced = _read_group(stripped, brace)
        if not balanced:
            warnings.append("unbalanced braces in heading")
        segments.append((last_heading, stripped[last_end:m.start()]))
        last_heading = _plain_heading(stripped[hstart:hend]) or FRONT_SECTION
        last_end = nxt
    segments.append((last_heading, stripped[last_end:]))

    sections = []
    for heading, body in segments:
        paragraphs = []
        for block in _BLANK_LINE_RE.split(body):
            if not block.strip():
                continue
            para, para_warnings = _emit_paragraph(block)
            warnings.extend(para_warnings)
            if para.text:
                paragraphs.append(para)
        if heading == FRONT_SECTION and not paragraphs and sections:
            continue
        if paragraphs or heading != FRONT_SECTION:
            sections.append(Section(heading, paragraphs))

    if not sections:
        sections = [Section(FRONT_SECTION, [])]
    return ParsedDocument(paper_id, sections, warnings)


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------

_URL_TOKEN_RE = re.compile(r"(?:(?:https?|ftp)://|www\.)[^\s<>]+", re.IGNORECASE)
_TRAILING_PUNCT = ".,;:!?'\""
_BRACKET_PAIRS = {")": "(", "]": "[", "}": "{"}


def trim_url_tail(url):
    """Drop trailing sentence punctuation and unmatched closing brackets.

    A closing bracket stays when the body contains its opener, so wiki-style
    paths like ``/Foo_(bar)`` survive intact.
    """
    while url:
        ch = url[-1]
        if ch in _TRAILING_PUNCT:
            url = url[:-1]
            continue
        if ch in _BRACKET_PAIRS:
            opener = _BRACKET_PAIRS[ch]
            if url.count(opener) >= url.count(ch):
                break
            url = url[:-1]
            continue
        break
    return url


def _url_token_spans(text):
    spans = []
    for m in _URL_TOKEN_RE.finditer(text):
        trimmed = trim_url_tail(m.group())
        if trimmed:
            spans.append((m.start(), m.start() + len(trimmed)))
    return spans


def segment_sentences(text):
    """Split a paragraph into sentence spans that tile it exactly.

    Boundaries sit after ``.?!`` runs followed by whitespace, except inside a
    URL token or after a single-letter abbreviation; trailing whitespace
    belongs to the preceding span.
    """
    if not text:
        return []
    n = len(text)
    url_spans = _url_token_spans(text)
    boundaries = []
    for m in re.finditer(r"[.?!]+", text):
        end = m.end()
        if end >= n or not text[end].isspace():
            continue
        p = m.start()
        if any(s <= p < e for s, e in url_spans):
            continue
        if "." in m.group():
            c = p - 1
            if (
                c >= 0
                and text[c].isalpha()
                and (c == 0 or text[c - 1].isspace() or text[c - 1] == ".")
            ):
                continue  # single-letter abbreviation: initials, e.g., i.e.
        j = end
        while j < n and text[j].isspace():
            j += 1
        if j < n:
            boundaries.append(j)
    spans = []
    start = 0
    for b in boundaries:
        spans.append((start, b))
        start = b
    spans.append((start, n))
    return spans


def sentence_at(text, spans, pos):
    """Return the (start, end) sentence span containing character pos."""
    for s, e in spans:
        if s <= pos < e:
            return s, e
    return spans[-1] if spans else (0, len(text))
