"""Registrable-domain (eTLD+1) lookup against a bundled public-suffix snapshot."""

import ipaddress
from functools import lru_cache
from importlib import resources

_SNAPSHOT = "public_suffix_list.dat"


class _SuffixRules:
    def __init__(self, lines):
        self.plain = set()
        self.wildcards = set()   # base of "*.<base>" rules
        self.exceptions = set()  # "!<rule>" rules, without the "!"
        for line in lines:
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            if line.startswith("!"):
                self.exceptions.add(line[1:])
            elif line.startswith("*."):
                self.wildcards.add(line[2:])
            else:
                self.plain.add(line)


@lru_cache(maxsize=1)
def _rules():
    text = resources.files("paperlinks.data").joinpath(_SNAPSHOT).read_text()
    return _SuffixRules(text.splitlines())


def is_ip_literal(host):
    """True for dotted-quad IPv4 or (possibly bracketed) IPv6 hosts."""
    candidate = host[1:-1] if host.startswith("[") and host.endswith("]") else host
    try:
        ipaddress.ip_address(candidate)
        return True
    except ValueError:
        return False


def public_suffix_length(labels):
    """Number of labels in the public suffix of a dotted host, per PSL rules.

    Exception rules win over everything; otherwise the longest matching rule
    prevails. Unlisted suffixes fall back to a single-label suffix, so the
    registrable domain of an unknown host is its last two labels.
    """
    rules = _rules()
    n = len(labels)
    for i in range(n):  # longest candidate first
        if ".".join(labels[i:]) in rules.exceptions:
            return n - i - 1
    best = 1
    for i in range(n):
        candidate = ".".join(labels[i:])
        if candidate in rules.plain:
            best = max(best, n - i)
        if i + 1 < n and ".".join(labels[i + 1:]) in rules.wildcards:
            best = max(best, n - i)
    return best


def registrable_domain(host):
    """Return the eTLD+1 of a normalized hostname.

    IP literals come back unchanged, as does a host that is itself a public
    suffix (there is no registrable domain beneath it to name).
    """
    if not host or is_ip_literal(host):
        return host
    labels = host.rstrip(".").split(".")
    if len(labels) < 2:
        return host
    ps_len = public_suffix_length(labels)
    if ps_len >= len(labels):
        return host
    return ".".join(labels[len(labels) - ps_len - 1:])
