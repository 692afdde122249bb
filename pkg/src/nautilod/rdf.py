"""RDF terms, descriptions and the Web-of-Data abstraction.

A Web of Data instance maps every URI to the set of triples obtained by
dereferencing it.  URIs that cannot be dereferenced map to the empty
description.
"""

from __future__ import annotations

import re
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union
from urllib.parse import urlsplit

XSD = "http://www.w3.org/2001/XMLSchema#"

_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")


class RDFError(ValueError):
    """Raised for malformed terms, triples or fixture files."""


def _normalize_iri(value: str) -> str:
    # only scheme and host are case-folded
    scheme, sep, rest = value.partition(":")
    if not rest.startswith("//"):
        return scheme.lower() + sep + rest
    authority_end = len(rest)
    for stop in "/?#":
        idx = rest.find(stop, 2)
        if idx != -1:
            authority_end = min(authority_end, idx)
    authority = rest[2:authority_end]
    userinfo, at, hostport = authority.rpartition("@")
    if hostport.startswith("["):
        host, bracket, port = hostport.partition("]")
        hostport = host.lower() + bracket + port
    else:
        host, colon, port = hostport.partition(":")
        hostport = host.lower() + colon + port
    return scheme.lower() + sep + "//" + userinfo + at + hostport + rest[authority_end:]


@dataclass(frozen=True, order=True)
class Uri:
    value: str

    def __post_init__(self) -> None:
        if not self.value or not _SCHEME_RE.match(self.value):
            raise RDFError(f"not an absolute IRI: {self.value!r}")
        if any(c in self.value for c in ' <>"{}|\\^`\n\r\t'):
            raise RDFError(f"illegal character in IRI: {self.value!r}")
        normalized = _normalize_iri(self.value)
        if normalized != self.value:
            object.__setattr__(self, "value", normalized)

    @property
    def host(self) -> str:
        return urlsplit(self.value).hostname or ""

    def n3(self) -> str:
        return f"<{self.value}>"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Uri | None = None
    language: str | None = None

    def __post_init__(self) -> None:
        if self.datatype is not None and self.language is not None:
            raise RDFError("a literal cannot carry both a datatype and a language tag")
        if self.language is not None:
            object.__setattr__(self, "language", self.language.lower())

    def n3(self) -> str:
        text = (
            self.lexical.replace("\\", "\\\\")
            .replace('"', '\\"')
            .replace("\n", "\\n")
            .replace("\r", "\\r")
        )
        if self.datatype is not None:
            return f'"{text}"^^{self.datatype.n3()}'
        if self.language is not None:
            return f'"{text}"@{self.language}'
        return f'"{text}"'

    def __str__(self) -> str:
        return self.lexical


Term = Union[Uri, Literal]


def term_sort_key(term: Term) -> tuple:
    """Total order over terms: URIs before literals, then lexical form."""
    if isinstance(term, Uri):
        return (0, term.value, "", "")
    return (
        1,
        term.lexical,
        term.datatype.value if term.datatype else "",
        term.language or "",
    )


@dataclass(frozen=True)
class Triple:
    subject: Uri
    predicate: Uri
    object: Term

    def __post_init__(self) -> None:
        if not isinstance(self.subject, Uri) or not isinstance(self.predicate, Uri):
            raise RDFError("subject and predicate must be URIs")
        if not isinstance(self.object, (Uri, Literal)):
            raise RDFError("object must be a URI or a literal")

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


class Description:
    """Immutable set of triples served for one URI, indexed for lookups."""

    __slots__ = ("source", "triples", "_sp", "_po", "_p", "_s", "_o")

    def __init__(self, source: Uri, triples: Iterable[Triple] = ()) -> None:
        self.source = source
        self.triples: frozenset[Triple] = frozenset(triples)
        sp: dict[tuple[Uri, Uri], list[Triple]] = defaultdict(list)
        po: dict[tuple[Uri, Term], list[Triple]] = defaultdict(list)
        p: dict[Uri, list[Triple]] = defaultdict(list)
        s: dict[Uri, list[Triple]] = defaultdict(list)
        o: dict[Term, list[Triple]] = defaultdict(list)
        for t in self.triples:
            sp[(t.subject, t.predicate)].append(t)
            po[(t.predicate, t.object)].append(t)
            p[t.predicate].append(t)
            s[t.subject].append(t)
            o[t.object].append(t)
        self._sp, self._po, self._p, self._s, self._o = (
            dict(sp), dict(po), dict(p), dict(s), dict(o)
        )

    def __len__(self) -> int:
        return len(self.triples)

    def __bool__(self) -> bool:
        return bool(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self.triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Description):
            return NotImplemented
        return self.source == other.source and self.triples == other.triples

    def __hash__(self) -> int:
        return hash((self.source, self.triples))

    def __repr__(self) -> str:
        return f"Description({self.source.value!r}, {len(self.triples)} triples)"

    def match(
        self,
        subject: Uri | None = None,
        predicate: Uri | None = None,
        obj: Term | None = None,
    ) -> Iterator[Triple]:
        """Yield triples matching the given pattern; ``None`` is a wildcard."""
        if subject is not None and predicate is not None:
            candidates = self._sp.get((subject, predicate), ())
        elif predicate is not None and obj is not None:
            candidates = self._po.get((predicate, obj), ())
        elif predicate is not None:
            candidates = self._p.get(predicate, ())
        elif subject is not None:
            candidates = self._s.get(subject, ())
        elif obj is not None:
            candidates = self._o.get(obj, ())
        else:
            candidates = self.triples
        for t in candidates:
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if obj is not None and t.object != obj:
                continue
            yield t


class WebInstance:
    """A Web of Data instance: a total, per-run cached description function.

    Subclasses implement :meth:`_load`; :meth:`resolve` adds snapshot
    caching so repeated lookups of one URI return the same object.
    """

    def __init__(self) -> None:
        self._cache: dict[Uri, Description] = {}
        self._locks: dict[Uri, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def _load(self, uri: Uri) -> Description:
        raise NotImplementedError

    def resolve(self, uri: Uri) -> Description:
        cached = self._cache.get(uri)
        if cached is not None:
            return cached
        with self._guard:
            lock = self._locks[uri]
        with lock:
            cached = self._cache.get(uri)
            if cached is None:
                cached = self._load(uri)
                self._cache[uri] = cached
            return cached


def resolve(instance: WebInstance, uri: Uri) -> Description:
    return instance.resolve(uri)


class FixtureWeb(WebInstance):
    """File-backed instance; unlisted URIs resolve to the empty description."""

    def __init__(self, descriptions: dict[Uri, Description] | None = None) -> None:
        super().__init__()
        self.descriptions: dict[Uri, Description] = dict(descriptions or {})

    def _load(self, uri: Uri) -> Description:
        return self.descriptions.get(uri) or Description(uri)

    @property
    def uris(self) -> list[Uri]:
        return sorted(self.descriptions)

    @classmethod
    def from_triples(cls, mapping: dict[Uri, Iterable[Triple]]) -> "FixtureWeb":
        return cls({u: Description(u, ts) for u, ts in mapping.items()})


def parse_manifest(path: Path) -> list[tuple[Uri, Path]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise RDFError(f"manifest not found: {path}") from None
    entries: list[tuple[Uri, Path]] = []
    seen: set[Uri] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = raw.strip().split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise RDFError(f"{path}:{lineno}: expected '<uri>\\t<file>'")
        uri_text = parts[0].strip()
        if uri_text.startswith("<") and uri_text.endswith(">"):
            uri_text = uri_text[1:-1]
        try:
            uri = Uri(uri_text)
        except RDFError as exc:
            raise RDFError(f"{path}:{lineno}: {exc}") from None
        if uri in seen:
            raise RDFError(f"{path}:{lineno}: duplicate entry for {uri.value}")
        seen.add(uri)
        entries.append((uri, path.parent / parts[1].strip()))
    return entries


def load_fixture_web(manifest_path: str | Path) -> FixtureWeb:
    """Load a manifest of ``URI<TAB>file.nt`` lines into a :class:`FixtureWeb`."""
    from .ntriples import parse_ntriples

    descriptions: dict[Uri, Description] = {}
    for uri, file in parse_manifest(Path(manifest_path)):
        try:
            text = file.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise RDFError(f"fixture file not found: {file}") from None
        descriptions[uri] = Description(uri, parse_ntriples(text, source=str(file)))
    return FixtureWeb(descriptions)
