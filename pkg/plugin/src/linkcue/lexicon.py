"""Cue-lexicon classifier mirroring the pipeline's built-in rules.

This is the conformance baseline: piping a mention stream through a
``lexicon`` model must reproduce the host pipeline's own labels exactly, so
every rule here (cue vocabulary, plural matching, nearest-cue tie-break,
confidences, URL position search) is part of the wire contract. Only
information carried by the protocol is used: the context sentence and the
normalized URL string.
"""

import re

METHODS_CUES = frozenset({
    "code", "implementation", "software", "tool", "toolkit", "library",
    "package", "repository", "script",
})
DATA_CUES = frozenset({
    "data", "dataset", "corpus", "database", "benchmark", "annotations",
    "samples", "measurements",
})
DATA_HOST_DOMAINS = frozenset({"zenodo.org", "figshare.com", "kaggle.com"})
METHODS_HOST_DOMAINS = frozenset({"github.com", "gitlab.com", "bitbucket.org"})

CONTEXT_CUE_CONFIDENCE = 0.9
HOST_CUE_CONFIDENCE = 0.6
DEFAULT_CONFIDENCE = 0.5

URL_PLACEHOLDER = "[URL]"

LABELS = ("data", "methods", "supplement")

_WORD_RE = re.compile(r"[a-z0-9]+")
_SCHEME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.\-]*://")


def host_of(url):
    """Hostname of a normalized URL string (scheme optional)."""
    rest = _SCHEME_RE.sub("", url)
    authority = rest.split("/", 1)[0].rsplit("@", 1)[-1]
    if authority.startswith("["):
        return authority.split("]", 1)[0] + "]"
    return authority.rsplit(":", 1)[0] if ":" in authority else authority


def _cue_domain(host):
    # cue domains are all two-label names, so the last two host labels
    # decide membership exactly as the pipeline's suffix lookup does
    labels = host.lower().rstrip(".").split(".")
    return ".".join(labels[-2:]) if len(labels) >= 2 else host.lower()


def _match_cue(token, cues):
    if token in cues:
        return True
    if token.endswith("s") and token[:-1] in cues:
        return True
    return token + "s" in cues


def _url_position(context, url, host):
    pos = context.find(url)
    if pos != -1:
        return pos, pos + len(url)
    pos = context.find(URL_PLACEHOLDER)
    if pos != -1:
        return pos, pos + len(URL_PLACEHOLDER)
    lower = context.lower()
    pos = lower.find(url.lower())
    if pos != -1:
        return pos, pos + len(url)
    pos = lower.find(host)
    if pos != -1:
        return pos, pos + len(host)
    mid = len(context) // 2
    return mid, mid


def classify(context, url):
    """(label, confidence) for one mention; the nearest cue term wins with
    distance ties going to methods, then host cues, then supplement."""
    host = host_of(url).lower()
    url_start, url_end = _url_position(context, url, host)
    best = None
    for m in _WORD_RE.finditer(context.lower()):
        if m.start() < url_end and url_start < m.end():
            continue
        token = m.group()
        if _match_cue(token, METHODS_CUES):
            label = "methods"
        elif _match_cue(token, DATA_CUES):
            label = "data"
        else:
            continue
        key = (abs(m.start() - url_start), 0 if label == "methods" else 1)
        if best is None or key < best[0]:
            best = (key, label)
    if best is not None:
        return best[1], CONTEXT_CUE_CONFIDENCE
    domain = _cue_domain(host)
    if domain in DATA_HOST_DOMAINS:
        return "data", HOST_CUE_CONFIDENCE
    if domain in METHODS_HOST_DOMAINS:
        return "methods", HOST_CUE_CONFIDENCE
    return "supplement", DEFAULT_CONFIDENCE
