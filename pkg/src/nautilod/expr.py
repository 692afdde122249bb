"""NautiLOD path expressions: AST, parser and canonical printer.

Surface syntax::

    path ::= pred | ^pred | (pred)^-1 | action | path/path | (path)? | (path)*
           | (path)+ | path|path | path[ASK ...]
    pred ::= <iri> | <prefix:local> | prefix:local | <_>
    action ::= name[(?v, ...)][SELECT ...]   (optionally wrapped in {...})

Postfix operators bind tighter than ``/``, which binds tighter than ``|``.
Both binary operators associate to the left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .query import QueryError, QueryPattern, expand_iri, format_query, parse_query
from .rdf import Uri

DEFAULT_PREFIXES: dict[str, str] = {
    "owl": "http://www.w3.org/2002/07/owl#",
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "foaf": "http://xmlns.com/foaf/0.1/",
    "dbpo": "http://dbpedia.org/ontology/",
    "dbp": "http://dbpedia.org/resource/",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int | None = None) -> None:
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class UnknownPrefix(ExprSyntaxError):
    pass


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # keep pytest from collecting it

    query: QueryPattern

    def __post_init__(self) -> None:
        if self.query.form != "ASK":
            raise ValueError("a test must be an ASK query")


@dataclass(frozen=True)
class ActionSpec:
    procedure: str
    query: QueryPattern
    args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.query.form != "SELECT" or not self.query.projection:
            raise ValueError("an action needs a SELECT query projecting at least one variable")
        for a in self.args:
            if a not in self.query.projection:
                raise ValueError(f"action argument ?{a} is not projected by its query")


@dataclass(frozen=True)
class Pred:
    uri: Uri


@dataclass(frozen=True)
class InversePred:
    uri: Uri


@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class Action:
    spec: ActionSpec


@dataclass(frozen=True)
class Concat:
    left: "PathExpr"
    right: "PathExpr"


@dataclass(frozen=True)
class Alt:
    left: "PathExpr"
    right: "PathExpr"


@dataclass(frozen=True)
class Optional:
    inner: "PathExpr"


@dataclass(frozen=True)
class Star:
    inner: "PathExpr"


@dataclass(frozen=True)
class Plus:
    """One or more repetitions; same meaning as ``Concat(e, Star(e))``."""

    inner: "PathExpr"


@dataclass(frozen=True)
class Test:
    __test__ = False  # keep pytest from collecting it

    inner: "PathExpr"
    spec: TestSpec


PathExpr = Union[Pred, InversePred, Wildcard, Action, Concat, Alt, Optional, Star, Plus, Test]

_LEAVES = (Pred, InversePred, Wildcard, Action)


def children(e: PathExpr) -> tuple[PathExpr, ...]:
    if isinstance(e, (Concat, Alt)):
        return (e.left, e.right)
    if isinstance(e, (Optional, Star, Plus, Test)):
        return (e.inner,)
    return ()


def walk(e: PathExpr) -> Iterator[PathExpr]:
    """Pre-order traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def depth(e: PathExpr) -> int:
    kids = children(e)
    return 1 + (max(depth(k) for k in kids) if kids else 0)


def node_count(e: PathExpr) -> int:
    return sum(1 for _ in walk(e))


def desugar(e: PathExpr) -> PathExpr:
    """Rewrite every ``Plus(x)`` as ``Concat(x, Star(x))``."""
    if isinstance(e, Plus):
        inner = desugar(e.inner)
        return Concat(inner, Star(inner))
    if isinstance(e, Concat):
        return Concat(desugar(e.left), desugar(e.right))
    if isinstance(e, Alt):
        return Alt(desugar(e.left), desugar(e.right))
    if isinstance(e, Optional):
        return Optional(desugar(e.inner))
    if isinstance(e, Star):
        return Star(desugar(e.inner))
    if isinstance(e, Test):
        return Test(desugar(e.inner), e.spec)
    return e


def occurrence_ids(e: PathExpr) -> dict[int, int]:
    """Number every Test and Action node in pre-order, keyed by ``id(node)``.

    Two textually identical actions at different positions are distinct
    occurrences; both evaluators and the automaton use this numbering.
    """
    ids: dict[int, int] = {}
    for node in walk(e):
        if isinstance(node, (Test, Action)) and id(node) not in ids:
            ids[id(node)] = len(ids)
    return ids


def action_names(e: PathExpr) -> set[str]:
    return {n.spec.procedure for n in walk(e) if isinstance(n, Action)}


# --------------------------------------------------------------------------
# parser

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_CURIE_LOCAL_RE = re.compile(r"[^\s/|()\[\]{}?*+^<>,]*")
_VAR_RE = re.compile(r"\?([A-Za-z_][A-Za-z0-9_]*)")


class _ExprParser:
    def __init__(self, text: str, prefixes: Mapping[str, str]) -> None:
        self.text = text
        self.pos = 0
        self.prefixes = prefixes

    def error(self, message: str, pos: int | None = None) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.pos if pos is None else pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def startswith(self, s: str) -> bool:
        self.skip_ws()
        return self.text.startswith(s, self.pos)

    def parse(self) -> PathExpr:
        if not self.text.strip():
            raise ExprSyntaxError("empty expression", 0)
        e = self.parse_alt()
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error(f"unexpected {self.text[self.pos]!r}")
        return e

    def parse_alt(self) -> PathExpr:
        e = self.parse_concat()
        while self.peek() == "|":
            self.pos += 1
            e = Alt(e, self.parse_concat())
        return e

    def parse_concat(self) -> PathExpr:
        e = self.parse_postfix()
        while self.peek() == "/":
            self.pos += 1
            e = Concat(e, self.parse_postfix())
        return e

    def parse_postfix(self) -> PathExpr:
        start = self.pos
        e = self.parse_primary()
        while True:
            c = self.peek()
            if c == "?":
                self.pos += 1
                e = Optional(e)
            elif c == "*":
                self.pos += 1
                e = Star(e)
            elif c == "+":
                self.pos += 1
                e = Plus(e)
            elif c == "[":
                body_pos = self.pos
                body = self.read_bracket()
                e = Test(e, self.make_test(body, body_pos))
            elif self.startswith("^-1"):
                if not isinstance(e, Pred):
                    raise self.error("only a single predicate can be inverted", start)
                self.pos += 3
                e = InversePred(e.uri)
            else:
                return e

    def parse_primary(self) -> PathExpr:
        c = self.peek()
        if not c:
            raise self.error("unexpected end of expression")
        if c == "(":
            self.pos += 1
            if self.peek() == ")":
                raise self.error("empty group")
            e = self.parse_alt()
            if self.peek() != ")":
                raise self.error("expected ')'")
            self.pos += 1
            return e
        if c == "^":
            self.pos += 1
            inner_pos = self.pos
            target = self.parse_pred()
            if not isinstance(target, Pred):
                raise self.error("the wildcard cannot be inverted", inner_pos)
            return InversePred(target.uri)
        if c == "<":
            return self.parse_pred()
        if c == "{":
            self.pos += 1
            if self.peek() == "{":
                raise self.error("nested action braces")
            action = self.parse_action()
            if self.peek() != "}":
                raise self.error("expected '}' after action")
            self.pos += 1
            return action
        if c == "[":
            raise self.error("a test must follow a path")
        m = _IDENT_RE.match(self.text, self.pos)
        if m:
            after = m.end()
            if after < len(self.text) and self.text[after] == ":":
                return self.parse_pred()
            return self.parse_action()
        raise self.error(f"unexpected {c!r}")

    def parse_pred(self) -> Pred | Wildcard:
        self.skip_ws()
        start = self.pos
        if self.text.startswith("<", self.pos):
            end = self.text.find(">", self.pos)
            if end == -1:
                raise self.error("unterminated '<'")
            token = self.text[self.pos:end + 1]
            self.pos = end + 1
            if token == "<_>":
                return Wildcard()
        else:
            m = _IDENT_RE.match(self.text, self.pos)
            if not m or m.end() >= len(self.text) or self.text[m.end()] != ":":
                raise self.error("expected a predicate")
            local = _CURIE_LOCAL_RE.match(self.text, m.end() + 1)
            self.pos = local.end()
            token = self.text[start:self.pos]
        try:
            return Pred(expand_iri(token, self.prefixes))
        except QueryError as exc:
            msg = str(exc).split(" (at offset")[0]
            cls = UnknownPrefix if "unknown prefix" in msg else ExprSyntaxError
            raise cls(msg, start) from None

    def parse_action(self) -> Action:
        self.skip_ws()
        start = self.pos
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected an action name")
        name = m.group()
        self.pos = m.end()
        args: list[str] = []
        if self.peek() == "(":
            close = self.text.find(")", self.pos)
            if close == -1:
                raise self.error("unterminated action argument list")
            raw = self.text[self.pos + 1:close]
            for part in filter(None, re.split(r"[\s,]+", raw.strip())):
                vm = _VAR_RE.fullmatch(part)
                if not vm:
                    raise self.error(f"bad action argument {part!r}", self.pos + 1)
                args.append(vm.group(1))
            self.pos = close + 1
        if self.peek() != "[":
            raise self.error(f"action {name!r} needs a [SELECT ...] parameter query", start)
        body_pos = self.pos
        body = self.read_bracket()
        try:
            query = parse_query(body, self.prefixes)
        except QueryError as exc:
            raise ExprSyntaxError(f"in parameters of action {name!r}: {exc}", body_pos) from None
        if query.form != "SELECT":
            raise ExprSyntaxError(f"action {name!r} needs a SELECT query", body_pos)
        try:
            return Action(ActionSpec(name, query, tuple(args)))
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), body_pos) from None

    def read_bracket(self) -> str:
        self.skip_ws()
        assert self.text[self.pos] == "["
        start = self.pos
        depth_ = 0
        i = self.pos
        in_string: str | None = None
        while i < len(self.text):
            ch = self.text[i]
            if in_string:
                if ch == "\\":
                    i += 2
                    continue
                if ch == in_string:
                    in_string = None
            elif ch in "\"'":
                in_string = ch
            elif ch == "[":
                depth_ += 1
                if depth_ > 1:
                    raise self.error("nested brackets inside a test or action", i)
            elif ch == "]":
                depth_ -= 1
                if depth_ == 0:
                    self.pos = i + 1
                    return self.text[start + 1:i]
            i += 1
        raise self.error("unterminated '['", start)

    def make_test(self, body: str, pos: int) -> TestSpec:
        try:
            query = parse_query(body, self.prefixes)
        except QueryError as exc:
            raise ExprSyntaxError(f"in test: {exc}", pos) from None
        if query.form != "ASK":
            raise ExprSyntaxError("a test must be an ASK query", pos)
        return TestSpec(query)


def parse(text: str, prefixes: Mapping[str, str] | None = None) -> PathExpr:
    """Parse a NautiLOD expression; ``prefixes`` defaults to :data:`DEFAULT_PREFIXES`."""
    return _ExprParser(text, DEFAULT_PREFIXES if prefixes is None else prefixes).parse()


# --------------------------------------------------------------------------
# printer

_PREC_ALT, _PREC_CONCAT, _PREC_POSTFIX = 0, 1, 2


def _prec(e: PathExpr) -> int:
    if isinstance(e, Alt):
        return _PREC_ALT
    if isinstance(e, Concat):
        return _PREC_CONCAT
    return _PREC_POSTFIX


def _wrap(e: PathExpr, min_prec: int) -> str:
    s = pretty_print(e)
    return f"({s})" if _prec(e) < min_prec else s


def format_action(spec: ActionSpec) -> str:
    args = f"({', '.join('?' + a for a in spec.args)})" if spec.args else ""
    return f"{spec.procedure}{args}[{format_query(spec.query)}]"


def pretty_print(e: PathExpr) -> str:
    """Canonical surface form; ``parse(pretty_print(e)) == e`` for any AST."""
    if isinstance(e, Pred):
        return e.uri.n3()
    if isinstance(e, InversePred):
        return "^" + e.uri.n3()
    if isinstance(e, Wildcard):
        return "<_>"
    if isinstance(e, Action):
        return format_action(e.spec)
    if isinstance(e, Concat):
        return f"{_wrap(e.left, _PREC_CONCAT)}/{_wrap(e.right, _PREC_POSTFIX)}"
    if isinstance(e, Alt):
        return f"{_wrap(e.left, _PREC_ALT)}|{_wrap(e.right, _PREC_CONCAT)}"
    if isinstance(e, (Optional, Star, Plus)):
        op = {Optional: "?", Star: "*", Plus: "+"}[type(e)]
        return f"({pretty_print(e.inner)}){op}"
    if isinstance(e, Test):
        inner = e.inner
        # an action directly followed by '[' would read as its parameter query
        if isinstance(inner, Action) or _prec(inner) < _PREC_POSTFIX:
            head = f"({pretty_print(inner)})"
        else:
            head = pretty_print(inner)
        return f"{head}[{format_query(e.spec.query)}]"
    raise TypeError(f"not a path expression: {e!r}")


def load_prefix_file(path) -> dict[str, str]:
    """Read ``prefix IRI`` lines (``prefix: <IRI>`` is accepted too)."""
    from pathlib import Path

    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0].lower() == "@prefix":
            parts = parts[1:]
        if len(parts) < 2:
            raise ValueError(f"{path}:{lineno}: expected 'prefix IRI'")
        name = parts[0].rstrip(":")
        iri = parts[1].rstrip(".").strip()
        if iri.startswith("<") and iri.endswith(">"):
            iri = iri[1:-1]
        out[name] = iri
    return out
