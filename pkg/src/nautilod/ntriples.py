"""Line-oriented N-Triples reader and writer (no blank nodes)."""

from __future__ import annotations

import re
from typing import Iterable, TextIO

from .rdf import Literal, RDFError, Term, Triple, Uri, term_sort_key


class NTriplesError(RDFError):
    def __init__(self, message: str, line: int, source: str | None = None) -> None:
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line


class BlankNodeError(NTriplesError):
    pass


_IRI = r"<([^<>\"{}|^`\\\x00-\x20]*(?:\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8}|[^<>\"{}|^`\\\x00-\x20])*)>"
_LIT = r'"((?:[^"\\\n\r]|\\[tbnrf"\'\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)"'
_LANG = r"@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)"
_TERM_RE = re.compile(
    rf"\s*(?:{_IRI}|{_LIT}(?:\^\^{_IRI}|{_LANG})?|(_:\S+))"
)
_END_RE = re.compile(r"\s*\.\s*(?:#.*)?$")

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_UNESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")


def _unescape(text: str) -> str:
    if "\\" not in text:
        return text

    def repl(m: re.Match) -> str:
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        return _ESCAPES.get(m.group(3), m.group(0))

    return _UNESCAPE_RE.sub(repl, text)


def _read_term(line: str, pos: int, lineno: int, source: str | None) -> tuple[Term, int]:
    m = _TERM_RE.match(line, pos)
    if m is None:
        raise NTriplesError(f"expected a term at column {pos + 1}", lineno, source)
    iri, lexical, dtype, lang, bnode = m.groups()
    if bnode is not None:
        raise BlankNodeError(f"blank node {bnode} is not supported", lineno, source)
    try:
        if iri is not None:
            return Uri(_unescape(iri)), m.end()
        datatype = Uri(_unescape(dtype)) if dtype is not None else None
        return Literal(_unescape(lexical), datatype, lang), m.end()
    except RDFError as exc:
        raise NTriplesError(str(exc), lineno, source) from None


def parse_line(line: str, lineno: int = 1, source: str | None = None) -> Triple | None:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    s, pos = _read_term(line, 0, lineno, source)
    p, pos = _read_term(line, pos, lineno, source)
    o, pos = _read_term(line, pos, lineno, source)
    if not _END_RE.match(line, pos):
        raise NTriplesError("expected '.' at end of triple", lineno, source)
    if not isinstance(s, Uri):
        raise NTriplesError("subject must be an IRI", lineno, source)
    if not isinstance(p, Uri):
        raise NTriplesError("predicate must be an IRI", lineno, source)
    return Triple(s, p, o)


def parse_ntriples(
    text: str | TextIO | Iterable[str],
    *,
    source: str | None = None,
    skip_blank_nodes: bool = False,
) -> set[Triple]:
    """Parse N-Triples into a set of triples.

    Blank nodes raise :class:`BlankNodeError` unless ``skip_blank_nodes`` is
    set, in which case the offending lines are dropped.
    """
    # only \n ends a line: str.splitlines would also break on U+0085, U+2028 and friends
    lines = text.split("\n") if isinstance(text, str) else text
    triples: set[Triple] = set()
    for lineno, line in enumerate(lines, start=1):
        try:
            triple = parse_line(line.rstrip("\r\n"), lineno, source)
        except BlankNodeError:
            if skip_blank_nodes:
                continue
            raise
        if triple is not None:
            triples.add(triple)
    return triples


def format_term(term: Term) -> str:
    return term.n3()


def parse_term(text: str) -> Term:
    """Parse a single N-Triples term such as ``<http://x>`` or ``"1"^^<...>``."""
    term, pos = _read_term(text, 0, 1, None)
    if text[pos:].strip():
        raise NTriplesError("trailing characters after term", 1)
    return term


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    """Serialize triples, one per line, in a stable order."""
    ordered = sorted(
        triples,
        key=lambda t: (t.subject.value, t.predicate.value, term_sort_key(t.object)),
    )
    return "".join(t.n3() + "\n" for t in ordered)
