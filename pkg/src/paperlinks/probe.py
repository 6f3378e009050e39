"""Polite HTTP liveness probing.

The prober takes an injected single-request transport and implements redirect
following, the dual http/https trial for scheme-less URLs, one Retry-After
retry on 429, per-domain politeness, and an append-only crash-resumable
cache. Tests drive it against stub transports and a local server; hitting the
real web is strictly a CLI mode.
"""

import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from queue import Empty, Queue

from .psl import registrable_domain

TRANSPORT_ERROR_KINDS = (
    "ConnectionError",
    "SSLError",
    "ConnectTimeout",
    "ReadTimeout",
    "TooManyRedirects",
)

REDIRECT_STATUSES = {301, 302, 303, 307, 308}

# outcome ranking when both schemes are tried: lower status class is
# better, transport errors worst; https wins ties
_CLASS_RANK = {2: 5, 3: 4, 4: 3, 5: 2, 1: 1}


class Verdict(str, Enum):
    ALIVE = "alive"
    PROBLEMATIC = "problematic"


class TransportError(Exception):
    def __init__(self, kind, detail=""):
        if kind not in TRANSPORT_ERROR_KINDS:
            raise ValueError(f"unknown transport error kind {kind!r}")
        super().__init__(detail or kind)
        self.kind = kind


@dataclass
class TransportResponse:
    status: int
    headers: dict = field(default_factory=dict)

    def header(self, name):
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


@dataclass
class ProbeConfig:
    timeout_seconds: float = 120.0
    domain_wait_seconds: float = 6.0
    max_redirects: int = 10
    max_concurrent_domains: int = 8
    user_agent: str = "paperlinks-probe/0.1"


@dataclass(frozen=True)
class ProbeResult:
    canonical: str
    scheme_used: str           # scheme of the attempt that was kept
    final_status: object       # int HTTP code or transport-error kind string
    redirect_hops: int
    alive: bool
    probed_at: float

    def to_record(self):
        return {
            "canonical": self.canonical,
            "scheme_used": self.scheme_used,
            "final_status": self.final_status,
            "redirect_hops": self.redirect_hops,
            "alive": self.alive,
            "probed_at": self.probed_at,
        }

    @classmethod
    def from_record(cls, rec):
        return cls(
            canonical=rec["canonical"],
            scheme_used=rec["scheme_used"],
            final_status=rec["final_status"],
            redirect_hops=int(rec["redirect_hops"]),
            alive=bool(rec["alive"]),
            probed_at=float(rec["probed_at"]),
        )


def classify_liveness(result):
    return Verdict.ALIVE if result.final_status == 200 else Verdict.PROBLEMATIC


def _urljoin(base, location):
    if "://" in location[:10]:
        return location
    from urllib.parse import urljoin

    return urljoin(base, location)


def _probe_one_scheme(url_str, cfg, transport, sleep):
    """Follow one URL to its final destination. Returns (final_status, hops)."""
    current = url_str
    hops = 0
    retried_429 = False
    while True:
        try:
            resp = transport(current, cfg.timeout_seconds)
        except TransportError as exc:
            return exc.kind, hops
        status = resp.status
        if status in REDIRECT_STATUSES:
            location = resp.header("Location")
            if not location:
                return status, hops
            hops += 1
            if hops > cfg.max_redirects:
                return "TooManyRedirects", cfg.max_redirects
            current = _urljoin(current, location)
            continue
        if status == 429 and not retried_429:
            retry_after = resp.header("Retry-After")
            try:
                wait = min(float(retry_after), 60.0)
            except (TypeError, ValueError):
                return status, hops
            retried_429 = True
            sleep(max(wait, 0.0))
            continue
        return status, hops


def _rank(outcome, scheme):
    status, _hops = outcome
    if isinstance(status, int):
        class_rank = _CLASS_RANK.get(status // 100, 1)
    else:
        class_rank = 0
    return (class_rank, 1 if scheme == "https" else 0)


def probe(url, cfg, transport, sleep=time.sleep, clock=time.time):
    """Probe one normalized URL; every outcome is a ProbeResult, never an
    exception.

    Scheme-less URLs are tried with both https and http and the more
    successful final status wins (2xx > 3xx > 4xx > 5xx > transport error,
    ties to https). Redirects are followed to the final destination.
    """
    if not url.probeable:
        raise ValueError(f"not an HTTP-probeable URL: {url.canonical}")
    if url.scheme is not None:
        attempts = [(url.scheme, url.canonical)]
    else:
        attempts = [
            ("https", "https://" + url.canonical),
            ("http", "http://" + url.canonical),
        ]
    outcomes = []
    for scheme, url_str in attempts:
        outcomes.append((scheme, _probe_one_scheme(url_str, cfg, transport, sleep)))
    scheme, (status, hops) = max(outcomes, key=lambda so: _rank(so[1], so[0]))
    return ProbeResult(
        canonical=url.canonical,
        scheme_used=scheme,
        final_status=status,
        redirect_hops=hops,
        alive=status == 200,
        probed_at=clock(),
    )


class _DomainRateLimiter:
    """Serializes request starts per registrable domain with a minimum gap.

    Wraps the transport so every request (including redirect hops and the
    second scheme trial) honors the politeness interval. The gap gets a
    small grace on top so start-time guarantees survive scheduling jitter.
    """

    _GRACE = 0.01

    def __init__(self, transport, wait_seconds, sleep=time.sleep, clock=time.monotonic):
        self.transport = transport
        self.wait = wait_seconds
        self.sleep = sleep
        self.clock = clock
        self._last = {}
        self._locks = {}
        self._guard = threading.Lock()
        self.calls = []  # (url, start_time) log, test-observable

    def _lock_for(self, domain):
        with self._guard:
            if domain not in self._locks:
                self._locks[domain] = threading.Lock()
            return self._locks[domain]

    def __call__(self, url_str, timeout):
        host = url_str.split("://", 1)[-1].split("/", 1)[0].split("@")[-1]
        host = host.rsplit(":", 1)[0] if not host.startswith("[") else host
        domain = registrable_domain(host.lower())
        with self._lock_for(domain):
            if self.wait > 0:
                last = self._last.get(domain)
                now = self.clock()
                if last is not None and now - last < self.wait:
                    self.sleep(self.wait - (now - last) + self._GRACE)
            self._last[domain] = self.clock()
            self.calls.append((url_str, self._last[domain]))
        return self.transport(url_str, timeout)


class ProbeCache:
    """Append-only line-delimited store of probe results keyed on canonical."""

    def __init__(self, path):
        self.path = path
        self.results = {}
        self._lock = threading.Lock()

    def load(self):
        try:
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    result = ProbeResult.from_record(json.loads(line))
                    self.results[result.canonical] = result
        except FileNotFoundError:
            pass
        return self

    def check_writable(self):
        with open(self.path, "a", encoding="utf-8"):
            pass

    def append(self, result):
        with self._lock:
            self.results[result.canonical] = result
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(result.to_record(), sort_keys=True) + "\n")
                fh.flush()


def probe_all(urls, cfg, transport, cache, force=False,
              sleep=time.sleep, clock=time.time):
    """Probe every unique probeable canonical URL, politely and resumably.

    Cached URLs are skipped unless force is set. Each registrable domain's
    requests run serially with the configured minimum gap; distinct domains
    proceed concurrently up to max_concurrent_domains. Completed results are
    appended to the cache immediately.
    """
    unique = {}
    for url in urls:
        if url.probeable:
            unique.setdefault(url.canonical, url)

    cache.check_writable()  # fail before any network activity

    todo = {
        canonical: url
        for canonical, url in unique.items()
        if force or canonical not in cache.results
    }

    if todo:
        limited = _DomainRateLimiter(
            transport, cfg.domain_wait_seconds, sleep=sleep
        )
        by_domain = {}
        for canonical in sorted(todo):
            by_domain.setdefault(todo[canonical].domain, []).append(canonical)
        domain_queue = Queue()
        for domain in sorted(by_domain):
            domain_queue.put(by_domain[domain])
        errors = []

        def worker():
            while True:
                try:
                    batch = domain_queue.get_nowait()
                except Empty:
                    return
                for canonical in batch:
                    try:
                        result = probe(todo[canonical], cfg, limited,
                                       sleep=sleep, clock=clock)
                        cache.append(result)
                    except Exception as exc:  # pragma: no cover - defensive
                        errors.append(exc)

        n_workers = max(1, min(cfg.max_concurrent_domains, len(by_domain)))
        threads = [threading.Thread(target=worker) for _ in range(n_workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    return [cache.results[c] for c in sorted(unique)]


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------

def requests_transport(user_agent="paperlinks-probe/0.1"):
    """Real-network transport backed by the requests library.

    GET with the body discarded after the status line; redirects are not
    followed here (the prober counts hops itself). requests exceptions map
    onto the transport-error taxonomy.
    """
    import requests

    def transport(url_str, timeout):
        try:
            resp = requests.get(
                url_str,
                timeout=timeout,
                allow_redirects=False,
                stream=True,
                headers={"User-Agent": user_agent},
            )
            try:
                return TransportResponse(resp.status_code, dict(resp.headers))
            finally:
                resp.close()
        except requests.exceptions.SSLError as exc:
            raise TransportError("SSLError", str(exc)) from exc
        except requests.exceptions.ConnectTimeout as exc:
            raise TransportError("ConnectTimeout", str(exc)) from exc
        except requests.exceptions.ReadTimeout as exc:
            raise TransportError("ReadTimeout", str(exc)) from exc
        except requests.exceptions.ConnectionError as exc:
            raise TransportError("ConnectionError", str(exc)) from exc
        except requests.exceptions.RequestException as exc:
            raise TransportError("ConnectionError", str(exc)) from exc

    return transport


def replay_transport(rules_path):
    """Deterministic offline transport scripted by a JSON rules file.

    The file maps exact request URLs to outcomes: {"status": 200},
    {"status": 301, "location": "..."}, {"status": 429, "retry_after": 0,
    "then_status": 200}, or {"error": "ConnectTimeout"}. Unknown URLs fail
    with ConnectionError.
    """
    with open(rules_path, encoding="utf-8") as fh:
        rules = json.load(fh)
    seen = {}

    def transport(url_str, timeout):
        rule = rules.get(url_str)
        if rule is None:
            raise TransportError("ConnectionError", f"no replay rule for {url_str}")
        if "error" in rule:
            raise TransportError(rule["error"])
        headers = {}
        status = int(rule["status"])
        if "location" in rule:
            headers["Location"] = rule["location"]
        if "retry_after" in rule:
            if seen.get(url_str) and "then_status" in rule:
                return TransportResponse(int(rule["then_status"]), {})
            seen[url_str] = True
            headers["Retry-After"] = str(rule["retry_after"])
        return TransportResponse(status, headers)

    return transport
