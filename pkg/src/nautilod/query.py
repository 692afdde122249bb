"""A small ASK/SELECT query language evaluated over a single description.

Supported: basic graph patterns, ``FILTER(?var op constant)`` comparisons and
a top-level ``UNION`` of groups.  Anything else is rejected with
:class:`UnsupportedFeature`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Iterator, Mapping, Union

from .rdf import XSD, Description, Literal, RDFError, Term, Uri, term_sort_key

RDF_TYPE = Uri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")

XSD_DATE = Uri(XSD + "date")
XSD_INTEGER = Uri(XSD + "integer")
XSD_DECIMAL = Uri(XSD + "decimal")
XSD_STRING = Uri(XSD + "string")

_NUMERIC_TYPES = frozenset(
    Uri(XSD + name)
    for name in (
        "integer", "decimal", "double", "float", "int", "long", "short", "byte",
        "nonNegativeInteger", "positiveInteger", "negativeInteger",
        "nonPositiveInteger", "unsignedInt", "unsignedLong", "unsignedShort",
        "unsignedByte",
    )
)

COMPARISON_OPS = ("<=", ">=", "!=", "<", ">", "=")


class QueryError(ValueError):
    pass


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, position: int | None = None) -> None:
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class UnsupportedFeature(QueryError):
    def __init__(self, feature: str) -> None:
        super().__init__(f"unsupported query feature: {feature}")
        self.feature = feature


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return "?" + self.name


PatternTerm = Union[Var, Uri, Literal]


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    def variables(self) -> list[str]:
        return [t.name for t in (self.subject, self.predicate, self.object) if isinstance(t, Var)]


@dataclass(frozen=True)
class FilterExpr:
    lhs: Var
    op: str
    rhs: Uri | Literal


@dataclass(frozen=True)
class Group:
    """One conjunctive block: triple patterns plus the filters scoped to it."""

    bgp: tuple[TriplePattern, ...] = ()
    filters: tuple[FilterExpr, ...] = ()

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for tp in self.bgp:
            for v in tp.variables():
                seen.setdefault(v)
        return list(seen)


@dataclass(frozen=True)
class QueryPattern:
    form: str  # "ASK" | "SELECT"
    projection: tuple[str, ...]
    branches: tuple[Group, ...]

    @property
    def bgp(self) -> tuple[TriplePattern, ...]:
        return tuple(tp for g in self.branches for tp in g.bgp)

    @property
    def filters(self) -> tuple[FilterExpr, ...]:
        return tuple(f for g in self.branches for f in g.filters)

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for g in self.branches:
            for v in g.variables():
                seen.setdefault(v)
        return list(seen)


Binding = Mapping[str, Term]


@dataclass
class Diagnostics:
    """Collects non-fatal evaluation problems (filter type errors)."""

    messages: list[str] = field(default_factory=list)

    def add(self, message: str) -> None:
        self.messages.append(message)


# --------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>\s]*>)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<date>[+-]?\d{4}-\d{2}-\d{2}(?![\d]))
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<dtsep>\^\^)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<op><=|>=|!=|&&|\|\||[<>=!])
  | (?P<punct>[{}().,;*\[\]/|^+])
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-]*(?::[^\s<>"{}()\[\],;]*[^\s<>"{}()\[\],;.])?|:[^\s<>"{}()\[\],;]*[^\s<>"{}()\[\],;.])
    """,
    re.VERBOSE,
)

_UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "MINUS", "GRAPH", "SERVICE", "BIND", "VALUES", "ORDER",
    "GROUP", "HAVING", "LIMIT", "OFFSET", "DISTINCT", "REDUCED", "CONSTRUCT",
    "DESCRIBE", "FROM", "NOT", "EXISTS", "PREFIX", "BASE", "COUNT", "SUM",
    "MIN", "MAX", "AVG", "SAMPLE", "REGEX", "STR", "LANG", "BOUND",
}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup or ""
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    return toks


def expand_iri(text: str, prefixes: Mapping[str, str], position: int | None = None) -> Uri:
    """Expand ``<...>`` contents or a bare ``prefix:local`` into a URI.

    Inside angle brackets a bound prefix is expanded; anything else must be
    an absolute IRI.
    """
    if text.startswith("<") and text.endswith(">"):
        body = text[1:-1]
        prefix, colon, local = body.partition(":")
        if colon and prefix in prefixes and not local.startswith("//"):
            body = prefixes[prefix] + local
        elif colon and not local.startswith("//") and prefix.lower() not in _OPAQUE_SCHEMES:
            raise QuerySyntaxError(f"unknown prefix {prefix!r}", position)
    else:
        prefix, colon, local = text.partition(":")
        if not colon or prefix not in prefixes:
            raise QuerySyntaxError(f"unknown prefix {prefix!r}", position)
        body = prefixes[prefix] + local
    try:
        return Uri(body)
    except RDFError as exc:
        raise QuerySyntaxError(str(exc), position) from None


_OPAQUE_SCHEMES = {"urn", "mailto", "tag", "data", "tel", "file"}


def _unquote(s: str) -> str:
    from .ntriples import _unescape

    return _unescape(s[1:-1])


class _QueryParser:
    def __init__(self, text: str, prefixes: Mapping[str, str]) -> None:
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes = prefixes

    # token helpers
    def peek(self, offset: int = 0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query", len(self.text))
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind in ("punct", "op") and tok.text == text

    def at_kw(self, kw: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "name" and tok.text.upper() == kw

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise QuerySyntaxError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return tok

    def check_unsupported(self, tok: _Tok) -> None:
        if tok.kind == "name" and tok.text.upper() in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeature(tok.text.upper())

    # grammar
    def parse(self) -> QueryPattern:
        head = self.next()
        self.check_unsupported(head)
        form = head.text.upper() if head.kind == "name" else ""
        if form not in ("ASK", "SELECT"):
            raise QuerySyntaxError("query must start with ASK or SELECT", head.pos)
        projection: list[str] = []
        star = False
        if form == "SELECT":
            while True:
                tok = self.peek()
                if tok is None:
                    break
                self.check_unsupported(tok)
                if tok.kind == "var":
                    projection.append(tok.text[1:])
                    self.i += 1
                elif self.at("*"):
                    star = True
                    self.i += 1
                elif self.at("("):
                    raise UnsupportedFeature("projection expressions")
                else:
                    break
            if not projection and not star:
                raise QuerySyntaxError("SELECT needs at least one variable", head.pos)
        braced = False
        if self.at_kw("WHERE"):
            self.i += 1
            braced = True
        if self.at("{"):
            branches = self.parse_group_or_union()
        elif braced or form == "SELECT":
            tok = self.peek()
            raise QuerySyntaxError("expected '{'", tok.pos if tok else len(self.text))
        else:
            branches = (self.parse_block(stop=None),)
        # tolerate a trailing '.' after unbraced ASK bodies
        while self.at("."):
            self.i += 1
        tok = self.peek()
        if tok is not None:
            self.check_unsupported(tok)
            raise QuerySyntaxError(f"unexpected {tok.text!r}", tok.pos)
        query = QueryPattern(form, tuple(projection), branches)
        if star:
            query = QueryPattern(form, tuple(query.variables()), branches)
        for name in query.projection:
            if not any(name in g.variables() for g in branches):
                raise QuerySyntaxError(f"projected variable ?{name} does not occur in the pattern")
        return query

    def parse_group_or_union(self) -> tuple[Group, ...]:
        self.expect("{")
        if self.at("{"):
            branches = [self.parse_braced_block()]
            while self.at_kw("UNION"):
                self.i += 1
                branches.append(self.parse_braced_block())
            if self.at("."):
                self.i += 1
            if not self.at("}"):
                tok = self.peek()
                if tok is not None:
                    self.check_unsupported(tok)
                raise QuerySyntaxError(
                    "only a UNION of groups may appear at the top level",
                    tok.pos if tok else len(self.text),
                )
            self.expect("}")
            return tuple(branches)
        block = self.parse_block(stop="}")
        self.expect("}")
        return (block,)

    def parse_braced_block(self) -> Group:
        self.expect("{")
        if self.at("{"):
            raise UnsupportedFeature("nested groups")
        block = self.parse_block(stop="}")
        self.expect("}")
        return block

    def parse_block(self, stop: str | None) -> Group:
        patterns: list[TriplePattern] = []
        filters: list[FilterExpr] = []
        while True:
            tok = self.peek()
            if tok is None or (stop is not None and tok.text == stop):
                break
            self.check_unsupported(tok)
            if tok.kind == "name" and tok.text.upper() == "FILTER":
                self.i += 1
                filters.append(self.parse_filter())
            elif tok.kind == "name" and tok.text.upper() == "UNION":
                raise QuerySyntaxError("UNION must join braced groups", tok.pos)
            elif tok.text == "{":
                raise UnsupportedFeature("nested groups")
            else:
                patterns.extend(self.parse_triples())
            while self.at("."):
                self.i += 1
        return Group(tuple(patterns), tuple(filters))

    def parse_triples(self) -> list[TriplePattern]:
        s = self.parse_term(position="subject")
        out: list[TriplePattern] = []
        while True:
            p = self.parse_term(position="predicate")
            while True:
                o = self.parse_term(position="object")
                out.append(TriplePattern(s, p, o))
                if self.at(","):
                    self.i += 1
                    continue
                break
            if self.at(";"):
                self.i += 1
                tok = self.peek()
                if tok is None or tok.text in (".", "}"):
                    break
                continue
            break
        return out

    def parse_term(self, position: str) -> PatternTerm:
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "iri":
            return expand_iri(tok.text, self.prefixes, tok.pos)
        if tok.kind == "name":
            self.check_unsupported(tok)
            if tok.text == "a" and position == "predicate":
                return RDF_TYPE
            if ":" in tok.text:
                return expand_iri(tok.text, self.prefixes, tok.pos)
            if tok.text in ("true", "false") and position == "object":
                return Literal(tok.text, Uri(XSD + "boolean"))
            raise QuerySyntaxError(f"unexpected {tok.text!r}", tok.pos)
        if position == "object" and tok.kind in ("string", "number", "date"):
            self.i -= 1
            return self.parse_constant()
        if tok.kind == "punct" and tok.text in "[]":
            raise UnsupportedFeature("blank nodes")
        if tok.kind == "punct" and tok.text in ("/", "|", "^", "*", "+") or tok.text == "!":
            raise UnsupportedFeature("property paths")
        raise QuerySyntaxError(f"unexpected {tok.text!r} in {position} position", tok.pos)

    def parse_constant(self) -> Uri | Literal:
        tok = self.next()
        if tok.kind == "string":
            lexical = _unquote(tok.text)
            nxt = self.peek()
            if nxt is not None and nxt.kind == "dtsep":
                self.i += 1
                dt = self.next()
                if dt.kind == "iri" or (dt.kind == "name" and ":" in dt.text):
                    return Literal(lexical, expand_iri(dt.text, self.prefixes, dt.pos))
                raise QuerySyntaxError("expected datatype IRI after '^^'", dt.pos)
            if nxt is not None and nxt.kind == "lang":
                self.i += 1
                return Literal(lexical, language=nxt.text[1:])
            return Literal(lexical)
        if tok.kind == "date":
            return Literal(tok.text, XSD_DATE)
        if tok.kind == "number":
            if re.fullmatch(r"[+-]?\d+", tok.text):
                return Literal(tok.text, XSD_INTEGER)
            if "e" in tok.text.lower():
                return Literal(tok.text, Uri(XSD + "double"))
            return Literal(tok.text, XSD_DECIMAL)
        if tok.kind == "iri":
            return expand_iri(tok.text, self.prefixes, tok.pos)
        if tok.kind == "name" and ":" in tok.text:
            return expand_iri(tok.text, self.prefixes, tok.pos)
        if tok.kind == "name" and tok.text in ("true", "false"):
            return Literal(tok.text, Uri(XSD + "boolean"))
        raise QuerySyntaxError(f"expected a constant, found {tok.text!r}", tok.pos)

    def parse_filter(self) -> FilterExpr:
        self.expect("(")
        lhs_tok = self.next()
        if lhs_tok.kind != "var":
            self.check_unsupported(lhs_tok)
            raise UnsupportedFeature("filter expressions other than '?var op constant'")
        op_tok = self.next()
        if op_tok.kind != "op" or op_tok.text not in COMPARISON_OPS:
            if op_tok.text in ("&&", "||", "!"):
                raise UnsupportedFeature("boolean connectives in FILTER")
            raise QuerySyntaxError(f"expected a comparison operator, found {op_tok.text!r}", op_tok.pos)
        nxt = self.peek()
        if nxt is not None and nxt.kind == "var":
            raise UnsupportedFeature("variable-to-variable comparisons")
        rhs = self.parse_constant()
        if self.peek() is not None and self.peek().text in ("&&", "||"):
            raise UnsupportedFeature("boolean connectives in FILTER")
        self.expect(")")
        return FilterExpr(Var(lhs_tok.text[1:]), op_tok.text, rhs)


def parse_query(text: str, prefixes: Mapping[str, str] | None = None) -> QueryPattern:
    """Parse an ASK or SELECT query of the supported subset."""
    return _QueryParser(text, prefixes or {}).parse()


# --------------------------------------------------------------------------
# printing


def _format_term(t: PatternTerm) -> str:
    return str(t) if isinstance(t, Var) else t.n3()


def _format_group(g: Group) -> str:
    parts = [
        f"{_format_term(tp.subject)} {_format_term(tp.predicate)} {_format_term(tp.object)} ."
        for tp in g.bgp
    ]
    parts += [f"FILTER(?{f.lhs.name} {f.op} {f.rhs.n3()})" for f in g.filters]
    return "{ " + " ".join(parts) + " }" if parts else "{ }"


def format_query(q: QueryPattern) -> str:
    """Canonical single-line text of a query; round-trips through parse_query."""
    head = "ASK" if q.form == "ASK" else "SELECT " + " ".join("?" + v for v in q.projection)
    if len(q.branches) == 1:
        body = _format_group(q.branches[0])
    else:
        body = "{ " + " UNION ".join(_format_group(g) for g in q.branches) + " }"
    return f"{head} WHERE {body}"


# --------------------------------------------------------------------------
# evaluation


class FilterTypeError(QueryError):
    pass


def _numeric(lit: Literal) -> Decimal | float:
    try:
        return Decimal(lit.lexical.strip())
    except InvalidOperation:
        try:
            return float(lit.lexical)
        except ValueError:
            raise FilterTypeError(f"not a number: {lit.lexical!r}") from None


def _compare(value: Term, op: str, rhs: Uri | Literal) -> bool:
    if isinstance(rhs, Uri) or isinstance(value, Uri):
        if op not in ("=", "!="):
            raise FilterTypeError(f"cannot order {value.n3()} and {rhs.n3()}")
        if type(value) is not type(rhs):
            raise FilterTypeError(f"cannot compare {value.n3()} with {rhs.n3()}")
        return (value == rhs) == (op == "=")
    assert isinstance(value, Literal)
    if value.datatype in _NUMERIC_TYPES and rhs.datatype in _NUMERIC_TYPES:
        a, b = _numeric(value), _numeric(rhs)
        if isinstance(a, float) or isinstance(b, float):
            a, b = float(a), float(b)
    elif value.datatype == XSD_DATE and rhs.datatype == XSD_DATE:
        a, b = value.lexical, rhs.lexical
        if not (_ISO_DATE.fullmatch(a) and _ISO_DATE.fullmatch(b)):
            raise FilterTypeError(f"malformed date in {value.n3()} or {rhs.n3()}")
    elif _is_plain(value) and _is_plain(rhs):
        if op not in ("=", "!="):
            raise FilterTypeError("strings only support = and !=")
        a, b = (value.lexical, value.language), (rhs.lexical, rhs.language)
    else:
        raise FilterTypeError(f"incompatible operands {value.n3()} and {rhs.n3()}")
    return {
        "<": a < b,
        ">": a > b,
        "<=": a <= b,
        ">=": a >= b,
        "=": a == b,
        "!=": a != b,
    }[op]


_ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}(?:Z|[+-]\d{2}:\d{2})?")


def _is_plain(lit: Literal) -> bool:
    return lit.datatype is None or lit.datatype == XSD_STRING


def filter_holds(f: FilterExpr, binding: Binding, diagnostics: Diagnostics | None = None) -> bool:
    value = binding.get(f.lhs.name)
    if value is None:
        if diagnostics is not None:
            diagnostics.add(f"unbound variable ?{f.lhs.name} in FILTER")
        return False
    try:
        return _compare(value, f.op, f.rhs)
    except FilterTypeError as exc:
        if diagnostics is not None:
            diagnostics.add(f"FILTER(?{f.lhs.name} {f.op} {f.rhs.n3()}): {exc}")
        return False


def _resolve(t: PatternTerm, binding: dict[str, Term]) -> Term | None:
    if isinstance(t, Var):
        return binding.get(t.name)
    return t


def _match_bgp(patterns: tuple[TriplePattern, ...], d: Description) -> Iterator[dict[str, Term]]:
    def extend(i: int, binding: dict[str, Term]) -> Iterator[dict[str, Term]]:
        if i == len(patterns):
            yield binding
            return
        tp = patterns[i]
        s = _resolve(tp.subject, binding)
        p = _resolve(tp.predicate, binding)
        o = _resolve(tp.object, binding)
        if (s is not None and not isinstance(s, Uri)) or (p is not None and not isinstance(p, Uri)):
            return
        for t in d.match(s, p, o):
            new = binding
            ok = True
            for pat, val in ((tp.subject, t.subject), (tp.predicate, t.predicate), (tp.object, t.object)):
                if isinstance(pat, Var):
                    bound = new.get(pat.name)
                    if bound is None:
                        if new is binding:
                            new = dict(binding)
                        new[pat.name] = val
                    elif bound != val:
                        ok = False
                        break
            if ok:
                yield from extend(i + 1, new)

    # most selective patterns first: fewest variables
    order = sorted(range(len(patterns)), key=lambda k: len(patterns[k].variables()))
    patterns = tuple(patterns[k] for k in order)
    yield from extend(0, {})


def _group_solutions(
    g: Group, d: Description, diagnostics: Diagnostics | None
) -> Iterator[dict[str, Term]]:
    for binding in _match_bgp(g.bgp, d):
        if all(filter_holds(f, binding, diagnostics) for f in g.filters):
            yield binding


def solutions(
    q: QueryPattern, d: Description, diagnostics: Diagnostics | None = None
) -> Iterator[dict[str, Term]]:
    """All satisfying bindings over every UNION branch (unprojected)."""
    for g in q.branches:
        yield from _group_solutions(g, d, diagnostics)


def eval_ask(q: QueryPattern, d: Description, diagnostics: Diagnostics | None = None) -> bool:
    if q.form != "ASK":
        raise QueryError("eval_ask requires an ASK query")
    return next(solutions(q, d, diagnostics), None) is not None


def _binding_key(b: Mapping[str, Term], names: Iterable[str]) -> tuple:
    return tuple(term_sort_key(b[n]) if n in b else (-1,) for n in names)


def project(bindings: Iterable[Mapping[str, Term]], names: tuple[str, ...]) -> list[dict[str, Term]]:
    unique: dict[tuple, dict[str, Term]] = {}
    for b in bindings:
        row = {n: b[n] for n in names if n in b}
        key = tuple(sorted(row.items(), key=lambda kv: kv[0]))
        unique.setdefault(key, row)
    return sorted(unique.values(), key=lambda b: _binding_key(b, names))


def eval_select(
    q: QueryPattern, d: Description, diagnostics: Diagnostics | None = None
) -> list[dict[str, Term]]:
    if q.form != "SELECT":
        raise QueryError("eval_select requires a SELECT query")
    return project(solutions(q, d, diagnostics), q.projection)
