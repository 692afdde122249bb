"""Network controls: navigation parameters, per-fetch records and check_net."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .ntriples import serialize_ntriples
from .rdf import Description, RDFError, Uri, WebInstance

MEGABYTE = 1024 * 1024


@dataclass(frozen=True)
class NetworkParams:
    """Resource limits for one navigation run (all optional)."""

    max_der_triples: int | None = None
    save_graph: bool = False
    max_size: int | None = None  # MB
    timeout_der: int | None = None  # ms, per dereference
    timeout: int | None = None  # ms, whole run
    domains: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        for name in ("max_der_triples", "max_size", "timeout_der", "timeout"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 0):
                raise ValueError(f"{name} must be a non-negative integer")
        if self.domains is not None:
            object.__setattr__(
                self, "domains", tuple(d.strip().lower() for d in self.domains if d.strip())
            )

    def as_flags(self) -> dict[str, str]:
        """Parameter values keyed by their command-line names."""
        return {
            "maxDerTriples": _fmt(self.max_der_triples),
            "saveGraph": "true" if self.save_graph else "false",
            "maxSize": _fmt(self.max_size),
            "timeoutDer": _fmt(self.timeout_der),
            "timeout": _fmt(self.timeout),
            "domains": "{" + ",".join(self.domains) + "}" if self.domains is not None else "-",
        }


def _fmt(v: int | None) -> str:
    return "-" if v is None else str(v)


class HostError(RDFError):
    pass


def host_of(uri: Uri | str) -> str:
    """Lower-cased host of an absolute URI; raises if there is no authority."""
    text = uri.value if isinstance(uri, Uri) else uri
    parts = urlsplit(text)
    if not parts.netloc:
        raise HostError(f"URI has no authority: {text}")
    try:
        host = parts.hostname
    except ValueError as exc:
        raise HostError(f"malformed authority in {text}: {exc}") from None
    if not host:
        raise HostError(f"URI has no host: {text}")
    return host.lower()


def host_allowed(host: str, domains: tuple[str, ...] | None) -> bool:
    if domains is None:
        return True
    return any(host == d or host.endswith("." + d) for d in domains)


# FetchRecord.status values
OK = "ok"
HTTP_ERROR = "httpError"
TIMEOUT = "timeout"
SKIPPED = "skippedByPolicy"
PARSE_ERROR = "parseError"


@dataclass(frozen=True)
class FetchRecord:
    uri: Uri
    status: str
    bytes: int = 0
    triples: int = 0
    elapsed_ms: float = 0.0
    reason: str | None = None
    code: int | None = None
    cached: bool = False

    def __post_init__(self) -> None:
        if self.status != OK and (self.bytes or self.triples):
            raise ValueError("bytes and triples must be 0 unless status is ok")

    @property
    def label(self) -> str:
        if self.status == HTTP_ERROR:
            return f"httpError({self.code if self.code is not None else self.reason})"
        if self.status == SKIPPED:
            return f"skippedByPolicy({self.reason})"
        return self.status


@dataclass
class RunningTotals:
    """Counters fed to :func:`check_net` while a run progresses."""

    started: float = field(default_factory=time.perf_counter)
    bytes_transferred: int = 0
    candidate_host: str | None = None
    candidate_triples: int | None = None
    candidate_fetch_ms: float | None = None
    elapsed_ms_override: float | None = None

    @property
    def elapsed_ms(self) -> float:
        if self.elapsed_ms_override is not None:
            return self.elapsed_ms_override
        return (time.perf_counter() - self.started) * 1000.0


@dataclass(frozen=True)
class NetDecision:
    action: str  # "pass" | "skip" | "stop"
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.action == "pass"


PASS = NetDecision("pass")


def check_net(params: NetworkParams, totals: RunningTotals) -> NetDecision:
    """Decide whether navigation may continue.

    Global limits (``timeout``, ``maxSize``) stop the run.  Per-dereference
    limits (``domains``, ``maxDerTriples``, ``timeoutDer``) only skip the
    candidate described in ``totals``.
    """
    if params.timeout is not None and totals.elapsed_ms > params.timeout:
        return NetDecision("stop", "timeout")
    if params.max_size is not None and totals.bytes_transferred > params.max_size * MEGABYTE:
        return NetDecision("stop", "maxSize")
    if totals.candidate_host is not None and not host_allowed(totals.candidate_host, params.domains):
        return NetDecision("skip", "domains")
    if (
        params.max_der_triples is not None
        and totals.candidate_triples is not None
        and totals.candidate_triples > params.max_der_triples
    ):
        return NetDecision("skip", "maxDerTriples")
    if (
        params.timeout_der is not None
        and totals.candidate_fetch_ms is not None
        and totals.candidate_fetch_ms > params.timeout_der
    ):
        return NetDecision("skip", "timeoutDer")
    return PASS


def fetch(web: WebInstance, uri: Uri, params: NetworkParams) -> tuple[Description, FetchRecord]:
    """Dereference ``uri`` through ``web`` honouring per-fetch limits.

    Instances with their own transport (see :class:`~nautilod.deref.HttpWeb`)
    implement ``dereference``; anything else is served from ``resolve`` with
    the payload size taken as the N-Triples serialization length.
    """
    deref = getattr(web, "dereference", None)
    if deref is not None:
        return deref(uri, params)
    t0 = time.perf_counter()
    desc = web.resolve(uri)
    elapsed = (time.perf_counter() - t0) * 1000.0
    if params.max_der_triples is not None and len(desc) > params.max_der_triples:
        return Description(uri), FetchRecord(uri, SKIPPED, elapsed_ms=elapsed, reason="maxDerTriples")
    if params.timeout_der is not None and elapsed > params.timeout_der:
        return Description(uri), FetchRecord(uri, TIMEOUT, elapsed_ms=elapsed, reason="timeoutDer")
    size = len(serialize_ntriples(desc).encode("utf-8")) if desc else 0
    return desc, FetchRecord(uri, OK, bytes=size, triples=len(desc), elapsed_ms=elapsed)
