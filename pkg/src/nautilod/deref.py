"""Live Web of Data access: HTTP dereferencing with content negotiation."""

from __future__ import annotations

import logging
import socket
import threading
import time
import urllib.error
import urllib.request
from collections import defaultdict
from typing import Mapping

from .network import (
    HTTP_ERROR,
    OK,
    PARSE_ERROR,
    SKIPPED,
    TIMEOUT,
    FetchRecord,
    NetworkParams,
    host_of,
)
from .ntriples import NTriplesError, parse_ntriples
from .rdf import Description, Uri, WebInstance

log = logging.getLogger(__name__)

ACCEPT = (
    "application/n-triples, text/plain;q=0.9, text/turtle;q=0.8, "
    "application/rdf+xml;q=0.5, */*;q=0.1"
)
USER_AGENT = "swget/0.1 (nautilod)"
MAX_REDIRECTS = 5
DEFAULT_TIMEOUT_S = 30.0

# N-Triples is a subset of Turtle, so Turtle bodies are attempted too
_NTRIPLES_TYPES = {"application/n-triples", "text/plain", "text/turtle", "application/x-turtle", "text/n3"}


class _Redirects(urllib.request.HTTPRedirectHandler):
    max_redirections = MAX_REDIRECTS

    def redirect_request(self, req, fp, code, msg, headers, newurl):
        new = super().redirect_request(req, fp, code, msg, headers, newurl)
        if new is not None:
            new.add_header("Accept", ACCEPT)
        return new


class _FixedProxy(urllib.request.BaseHandler):
    """Send every request through one proxy, ignoring ``no_proxy``."""

    handler_order = 100

    def __init__(self, proxy: str) -> None:
        self.proxy = proxy.split("://", 1)[-1].rstrip("/")

    def http_open(self, req):
        req.set_proxy(self.proxy, "http")
        return None


class HttpWeb(WebInstance):
    """Web instance backed by HTTP GET; every failure yields an empty description.

    ``proxy`` routes all requests through one HTTP proxy.  Without it the
    standard ``http_proxy``/``https_proxy`` environment variables apply.
    """

    def __init__(
        self,
        *,
        proxy: str | None = None,
        per_host_limit: int = 4,
        headers: Mapping[str, str] | None = None,
    ) -> None:
        super().__init__()
        handlers: list = [_Redirects()]
        if proxy:
            handlers.insert(0, _FixedProxy(proxy))
            handlers.append(urllib.request.ProxyHandler({}))
        self._opener = urllib.request.build_opener(*handlers)
        self._headers = {"Accept": ACCEPT, "User-Agent": USER_AGENT, **(headers or {})}
        self._host_slots: dict[str, threading.BoundedSemaphore] = defaultdict(
            lambda: threading.BoundedSemaphore(per_host_limit)
        )
        self._slots_guard = threading.Lock()
        self._records: dict[Uri, tuple[Description, FetchRecord]] = {}
        self.fetch_log: list[FetchRecord] = []

    def _load(self, uri: Uri) -> Description:
        return self.dereference(uri, NetworkParams())[0]

    def dereference(self, uri: Uri, params: NetworkParams) -> tuple[Description, FetchRecord]:
        """Fetch ``uri`` once per instance; later calls are zero-byte cache hits."""
        with self._guard:
            lock = self._locks[uri]
        with lock:
            hit = self._records.get(uri)
            if hit is not None:
                desc, rec = hit
                cached = FetchRecord(uri, rec.status, 0, rec.triples, 0.0, rec.reason, rec.code, cached=True)
                self.fetch_log.append(cached)
                return desc, cached
            desc, rec = self._fetch(uri, params)
            self._records[uri] = (desc, rec)
            self._cache[uri] = desc
            self.fetch_log.append(rec)
            return desc, rec

    def _slot(self, host: str) -> threading.BoundedSemaphore:
        with self._slots_guard:
            return self._host_slots[host]

    def _fetch(self, uri: Uri, params: NetworkParams) -> tuple[Description, FetchRecord]:
        empty = Description(uri)
        scheme = uri.value.split(":", 1)[0]
        if scheme not in ("http", "https"):
            return empty, FetchRecord(uri, SKIPPED, reason="scheme")
        try:
            host = host_of(uri)
        except ValueError:
            return empty, FetchRecord(uri, SKIPPED, reason="authority")
        url = uri.value.split("#", 1)[0]
        timeout_s = params.timeout_der / 1000.0 if params.timeout_der else DEFAULT_TIMEOUT_S
        request = urllib.request.Request(url, headers=self._headers)
        t0 = time.perf_counter()
        try:
            with self._slot(host):
                with self._opener.open(request, timeout=timeout_s) as resp:
                    body = resp.read()
                    content_type = resp.headers.get_content_type()
                    charset = resp.headers.get_content_charset() or "utf-8"
        except urllib.error.HTTPError as exc:
            return empty, FetchRecord(uri, HTTP_ERROR, elapsed_ms=_ms(t0), code=exc.code)
        except (socket.timeout, TimeoutError):
            return empty, FetchRecord(uri, TIMEOUT, elapsed_ms=_ms(t0), reason="timeoutDer")
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                return empty, FetchRecord(uri, TIMEOUT, elapsed_ms=_ms(t0), reason="timeoutDer")
            return empty, FetchRecord(uri, HTTP_ERROR, elapsed_ms=_ms(t0), reason=str(exc.reason))
        except (OSError, ValueError) as exc:
            return empty, FetchRecord(uri, HTTP_ERROR, elapsed_ms=_ms(t0), reason=str(exc))
        elapsed = _ms(t0)
        if params.timeout_der is not None and elapsed > params.timeout_der:
            return empty, FetchRecord(uri, TIMEOUT, elapsed_ms=elapsed, reason="timeoutDer")
        if content_type not in _NTRIPLES_TYPES and content_type != "application/octet-stream":
            log.debug("unsupported content type %s for %s", content_type, uri.value)
            return empty, FetchRecord(uri, PARSE_ERROR, elapsed_ms=elapsed, reason=content_type)
        try:
            triples = parse_ntriples(
                body.decode(charset, errors="replace"), source=url, skip_blank_nodes=True
            )
        except (NTriplesError, LookupError) as exc:
            return empty, FetchRecord(uri, PARSE_ERROR, elapsed_ms=elapsed, reason=str(exc))
        if params.max_der_triples is not None and len(triples) > params.max_der_triples:
            return empty, FetchRecord(uri, SKIPPED, elapsed_ms=elapsed, reason="maxDerTriples")
        return Description(uri, triples), FetchRecord(
            uri, OK, bytes=len(body), triples=len(triples), elapsed_ms=elapsed
        )


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def dereference(web: HttpWeb, uri: Uri, params: NetworkParams | None = None) -> tuple[Description, FetchRecord]:
    return web.dereference(uri, params or NetworkParams())
