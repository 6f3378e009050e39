"""URL mention detection and normalization.

Detection is mention-level: every occurrence of a URL in a document becomes
its own hit, so downstream analytics can report both mention and unique
counts. Normalization is the dedup key everywhere else in the pipeline; its
rules are pinned by tests because small changes silently re-shard every
per-URL statistic.
"""

import re
from dataclasses import dataclass

from .ingest import _URL_TOKEN_RE, segment_sentences, sentence_at, trim_url_tail
from .psl import registrable_domain

_SCHEME_RE = re.compile(r"^([a-zA-Z][a-zA-Z0-9+.\-]*)://")
_ACCEPTED_SCHEMES = {"http", "https", "ftp"}
_DEFAULT_PORTS = {"http": 80, "https": 443, "ftp": 21}
_HOST_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_\-]*[a-z0-9_])?$")


@dataclass(frozen=True)
class NormalizedUrl:
    scheme: str | None  # http | https | ftp | None (scheme-less www form)
    host: str
    port: int | None
    path: str
    query: str | None
    canonical: str
    domain: str

    @property
    def probeable(self):
        return self.scheme in (None, "http", "https")


@dataclass(frozen=True)
class RawLinkHit:
    paper_id: str
    url_raw: str
    context_sentence: str
    section_heading: str
    paragraph_index: int
    in_footnote: bool
    char_span: tuple


@dataclass(frozen=True)
class LinkMention:
    paper_id: str
    url_raw: str
    context_sentence: str
    section_heading: str
    paragraph_index: int
    paragraph_count: int
    in_footnote: bool
    char_span: tuple
    normalized: NormalizedUrl

    @property
    def position_fraction(self):
        return self.paragraph_index / self.paragraph_count


@dataclass
class ExtractResult:
    mentions: list
    rejected: list  # RawLinkHits whose token failed normalization


def _valid_host(host):
    if not host:
        return False
    if host.startswith("[") and host.endswith("]"):
        return True  # bracketed IPv6 literal
    if ".." in host:
        return False
    labels = host.split(".")
    if not all(_HOST_LABEL_RE.fullmatch(label) for label in labels):
        return False
    if len(labels) < 2:
        return False
    return True


def normalize_url(url_raw):
    """Normalize a raw URL token, or return None when it is not salvageable.

    Applies, in order: trailing punctuation/bracket stripping, scheme and
    host lowercasing, userinfo and fragment removal, default-port removal,
    and trailing-slash stripping on the path. Query strings and
    percent-encoding survive untouched; path case is significant.
    """
    s = trim_url_tail(url_raw.strip())
    if not s:
        return None

    m = _SCHEME_RE.match(s)
    scheme = None
    if m:
        scheme = m.group(1).lower()
        if scheme not in _ACCEPTED_SCHEMES:
            return None
        s = s[m.end():]
    elif not s.lower().startswith("www."):
        return None

    s = s.split("#", 1)[0]
    query = None
    if "?" in s:
        s, query = s.split("?", 1)
        if query == "":
            query = None

    slash = s.find("/")
    if slash == -1:
        authority, path = s, ""
    else:
        authority, path = s[:slash], s[slash:]

    if "@" in authority:
        authority = authority.rsplit("@", 1)[1]

    port = None
    host = authority
    if authority.startswith("["):
        close = authority.find("]")
        if close == -1:
            return None
        host = authority[: close + 1]
        tail = authority[close + 1:]
        if tail:
            if not tail.startswith(":") or not tail[1:].isdigit():
                return None
            port = int(tail[1:])
    elif ":" in authority:
        host, _, port_s = authority.rpartition(":")
        if not port_s.isdigit():
            return None
        port = int(port_s)

    host = host.lower().rstrip(".")
    if not _valid_host(host):
        return None
    if scheme is not None and port == _DEFAULT_PORTS[scheme]:
        port = None

    path = path.rstrip("/") if path else ""

    parts = []
    if scheme is not None:
        parts.append(scheme + "://")
    parts.append(host)
    if port is not None:
        parts.append(f":{port}")
    parts.append(path)
    if query is not None:
        parts.append("?" + query)
    canonical = "".join(parts)

    return NormalizedUrl(
        scheme=scheme,
        host=host,
        port=port,
        path=path,
        query=query,
        canonical=canonical,
        domain=registrable_domain(host),
    )


def detect_urls(doc):
    """Find every URL occurrence in a parsed document.

    Structural hits (``\\url``/``\\href`` spans recorded by the lexer) are
    taken verbatim; bare-text hits need a scheme or a www. prefix and get
    their sentence punctuation trimmed. mailto: targets are ignored.
    """
    hits = []
    for idx, heading, para in doc.iter_paragraphs():
        spans = []
        for ls in para.link_spans:
            raw = para.text[ls.start:ls.end]
            if not raw or raw.lower().startswith("mailto:"):
                continue
            spans.append((ls.start, ls.end))
        structural = list(spans)
        for m in _URL_TOKEN_RE.finditer(para.text):
            trimmed = trim_url_tail(m.group())
            if not trimmed:
                continue
            s0, e0 = m.start(), m.start() + len(trimmed)
            if any(s0 < e and s < e0 for s, e in structural):
                continue
            spans.append((s0, e0))
        if not spans:
            continue
        spans.sort()
        sent_spans = segment_sentences(para.text)
        for s0, e0 in spans:
            ss, se = sentence_at(para.text, sent_spans, s0)
            in_footnote = any(
                s0 < fe and fs < e0 for fs, fe in para.footnote_spans
            )
            hits.append(
                RawLinkHit(
                    paper_id=doc.paper_id,
                    url_raw=para.text[s0:e0],
                    context_sentence=para.text[ss:se].strip(),
                    section_heading=heading,
                    paragraph_index=idx,
                    in_footnote=in_footnote,
                    char_span=(s0, e0),
                )
            )
    return hits


def extract_mentions(doc):
    """detect_urls plus normalization; hits that fail to normalize are
    collected separately so callers can count rejections."""
    mentions = []
    rejected = []
    count = doc.paragraph_count
    for hit in detect_urls(doc):
        normalized = normalize_url(hit.url_raw)
        if normalized is None:
            rejected.append(hit)
            continue
        mentions.append(
            LinkMention(
                paper_id=hit.paper_id,
                url_raw=hit.url_raw,
                context_sentence=hit.context_sentence,
                section_heading=hit.section_heading,
                paragraph_index=hit.paragraph_index,
                paragraph_count=count,
                in_footnote=hit.in_footnote,
                char_span=hit.char_span,
                normalized=normalized,
            )
        )
    return ExtractResult(mentions, rejected)


def mention_to_record(mention, link_class="", confidence=None, classifier_id=None):
    """Interchange record for the line-delimited mention file."""
    rec = {
        "paper_id": mention.paper_id,
        "url_raw": mention.url_raw,
        "canonical": mention.normalized.canonical,
        "domain": mention.normalized.domain,
        "link_class": link_class,
        "section": mention.section_heading,
        "paragraph_index": mention.paragraph_index,
        "paragraph_count": mention.paragraph_count,
        "in_footnote": mention.in_footnote,
        "context_sentence": mention.context_sentence,
    }
    if confidence is not None:
        rec["confidence"] = confidence
    if classifier_id is not None:
        rec["classifier_id"] = classifier_id
    return rec
