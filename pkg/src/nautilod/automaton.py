"""Navigation automaton compiled from a path expression.

Construction is Thompson-style with epsilon moves, followed by epsilon
elimination so that every state exposes only labelled transitions:
predicate labels consume one RDF link, test and action labels are crossed
without moving to another URI.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

from . import expr as ast
from .expr import ActionSpec, PathExpr, TestSpec
from .rdf import Uri


class AutomatonError(ValueError):
    pass


@dataclass(frozen=True)
class PredLabel:
    uri: Uri
    inverse: bool = False

    def __str__(self) -> str:
        return ("^" if self.inverse else "") + self.uri.n3()


@dataclass(frozen=True)
class WildcardLabel:
    def __str__(self) -> str:
        return "<_>"


@dataclass(frozen=True)
class TestLabel:
    __test__ = False  # keep pytest from collecting it

    spec: TestSpec
    occurrence: int

    def __str__(self) -> str:
        return f"test#{self.occurrence}"


@dataclass(frozen=True)
class ActionLabel:
    spec: ActionSpec
    occurrence: int

    def __str__(self) -> str:
        return f"{self.spec.procedure}#{self.occurrence}"


NavLabel = Union[PredLabel, WildcardLabel]
Label = Union[PredLabel, WildcardLabel, TestLabel, ActionLabel]
EPSILON = None


@dataclass
class _Thompson:
    """Epsilon-NFA under construction; states are list indices."""

    edges: list[list[tuple[Label | None, int]]] = field(default_factory=list)
    occurrences: dict[int, int] = field(default_factory=dict)

    def state(self) -> int:
        self.edges.append([])
        return len(self.edges) - 1

    def add(self, src: int, label: Label | None, dst: int) -> None:
        self.edges[src].append((label, dst))

    def build(self, e: PathExpr) -> tuple[int, int]:
        if isinstance(e, ast.Pred):
            return self._leaf(PredLabel(e.uri))
        if isinstance(e, ast.InversePred):
            return self._leaf(PredLabel(e.uri, inverse=True))
        if isinstance(e, ast.Wildcard):
            return self._leaf(WildcardLabel())
        if isinstance(e, ast.Action):
            return self._leaf(ActionLabel(e.spec, self.occurrences[id(e)]))
        if isinstance(e, ast.Test):
            s, f = self.build(e.inner)
            end = self.state()
            self.add(f, TestLabel(e.spec, self.occurrences[id(e)]), end)
            return s, end
        if isinstance(e, ast.Concat):
            s1, f1 = self.build(e.left)
            s2, f2 = self.build(e.right)
            self.add(f1, EPSILON, s2)
            return s1, f2
        if isinstance(e, ast.Alt):
            s, f = self.state(), self.state()
            for branch in (e.left, e.right):
                bs, bf = self.build(branch)
                self.add(s, EPSILON, bs)
                self.add(bf, EPSILON, f)
            return s, f
        if isinstance(e, (ast.Optional, ast.Star, ast.Plus)):
            s, f = self.state(), self.state()
            is_, if_ = self.build(e.inner)
            self.add(s, EPSILON, is_)
            self.add(if_, EPSILON, f)
            if not isinstance(e, ast.Optional):
                self.add(if_, EPSILON, is_)
            if not isinstance(e, ast.Plus):
                self.add(s, EPSILON, f)
            return s, f
        raise TypeError(f"not a path expression: {e!r}")

    def _leaf(self, label: Label) -> tuple[int, int]:
        s, f = self.state(), self.state()
        self.add(s, label, f)
        return s, f

    def closure(self, q: int) -> set[int]:
        seen = {q}
        stack = [q]
        while stack:
            cur = stack.pop()
            for label, dst in self.edges[cur]:
                if label is EPSILON and dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        return seen


@dataclass(frozen=True)
class NavAutomaton:
    """Epsilon-free NFA over predicate, test and action labels.

    ``transitions[q]`` lists ``(label, target)`` pairs in a fixed order.
    """

    initial: int
    finals: frozenset[int]
    transitions: tuple[tuple[tuple[Label, int], ...], ...]
    thompson_states: int = 0

    @property
    def states(self) -> range:
        return range(len(self.transitions))

    def _check(self, q: int) -> None:
        if not isinstance(q, int) or not 0 <= q < len(self.transitions):
            raise AutomatonError(f"unknown state {q!r}")

    def get_initial(self) -> int:
        return self.initial

    def is_final(self, q: int) -> bool:
        self._check(q)
        return q in self.finals

    def is_dead_end(self, q: int) -> bool:
        """True when no transition leaves ``q`` (nothing left to navigate)."""
        self._check(q)
        return not self.transitions[q]

    def next_p(self, q: int) -> list[NavLabel]:
        """Predicate and wildcard labels leaving ``q``, without duplicates."""
        self._check(q)
        out: dict[NavLabel, None] = {}
        for label, _ in self.transitions[q]:
            if isinstance(label, (PredLabel, WildcardLabel)):
                out.setdefault(label)
        return list(out)

    def get_tests(self, q: int) -> list[TestLabel]:
        self._check(q)
        return _unique(l for l, _ in self.transitions[q] if isinstance(l, TestLabel))

    def get_actions(self, q: int) -> list[ActionLabel]:
        self._check(q)
        return _unique(l for l, _ in self.transitions[q] if isinstance(l, ActionLabel))

    def get_test(self, q: int) -> TestLabel | None:
        tests = self.get_tests(q)
        if len(tests) > 1:
            raise AutomatonError(f"state {q} has {len(tests)} pending tests; use get_tests")
        return tests[0] if tests else None

    def get_action(self, q: int) -> ActionLabel | None:
        actions = self.get_actions(q)
        if len(actions) > 1:
            raise AutomatonError(f"state {q} has {len(actions)} pending actions; use get_actions")
        return actions[0] if actions else None

    def next_states(self, q: int, label: Label) -> frozenset[int]:
        self._check(q)
        targets = frozenset(dst for l, dst in self.transitions[q] if l == label)
        if not targets:
            raise AutomatonError(f"no transition labelled {label} from state {q}")
        return targets

    def next_state(self, q: int, label: Label) -> int:
        targets = self.next_states(q, label)
        if len(targets) > 1:
            raise AutomatonError(f"label {label} is nondeterministic at state {q}")
        return next(iter(targets))

    def transition_count(self) -> int:
        return sum(len(ts) for ts in self.transitions)

    def labels(self) -> list[Label]:
        return [label for ts in self.transitions for label, _ in ts]

    def accepts(self, word: Iterable[Uri]) -> bool:
        """NFA acceptance of a forward predicate word (tests and actions ignored).

        Test and action transitions are treated as free moves, which is only
        meaningful for automata without them.
        """
        current = self._free_closure({self.initial})
        for sym in word:
            nxt = set()
            for q in current:
                for label, dst in self.transitions[q]:
                    if isinstance(label, WildcardLabel) or (
                        isinstance(label, PredLabel) and not label.inverse and label.uri == sym
                    ):
                        nxt.add(dst)
            current = self._free_closure(nxt)
            if not current:
                return False
        return bool(current & self.finals)

    def _free_closure(self, states: set[int]) -> set[int]:
        out = set(states)
        stack = list(states)
        while stack:
            q = stack.pop()
            for label, dst in self.transitions[q]:
                if isinstance(label, (TestLabel, ActionLabel)) and dst not in out:
                    out.add(dst)
                    stack.append(dst)
        return out

    def to_dot(self, name: str = "nautilod") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
        for q in self.states:
            shape = "doublecircle" if q in self.finals else "circle"
            lines.append(f'  q{q} [shape={shape}, label="q{q}"];')
        lines.append(f"  __start -> q{self.initial};")
        for q in self.states:
            for label, dst in self.transitions[q]:
                text = _dot_label(label).replace("\\", "\\\\").replace('"', '\\"')
                style = ", style=dashed" if isinstance(label, (TestLabel, ActionLabel)) else ""
                lines.append(f'  q{q} -> q{dst} [label="{text}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_label(label: Label) -> str:
    if isinstance(label, TestLabel):
        from .query import format_query

        return "[" + format_query(label.spec.query) + "]"
    if isinstance(label, ActionLabel):
        return "{" + label.spec.procedure + "}"
    return str(label)


def _unique(items: Iterable) -> list:
    return list(dict.fromkeys(items))


def build_thompson(e: PathExpr) -> tuple[_Thompson, int, int]:
    t = _Thompson(occurrences=ast.occurrence_ids(e))
    start, end = t.build(e)
    return t, start, end


def build_automaton(e: PathExpr) -> NavAutomaton:
    """Compile ``e`` into an epsilon-free :class:`NavAutomaton`.

    Only the initial state and targets of labelled transitions survive
    elimination; states are renumbered densely in breadth-first order.
    """
    t, start, end = build_thompson(e)
    closures = {}

    def closure(q: int) -> set[int]:
        if q not in closures:
            closures[q] = t.closure(q)
        return closures[q]

    order: dict[int, int] = {start: 0}
    queue = deque([start])
    raw: list[list[tuple[Label, int]]] = []
    finals: set[int] = set()
    while queue:
        q = queue.popleft()
        new_q = order[q]
        out: list[tuple[Label, int]] = []
        seen: set[tuple[Label, int]] = set()
        cl = closure(q)
        if end in cl:
            finals.add(new_q)
        for s in sorted(cl):
            for label, dst in t.edges[s]:
                if label is EPSILON:
                    continue
                if dst not in order:
                    order[dst] = len(order)
                    queue.append(dst)
                edge = (label, order[dst])
                if edge not in seen:
                    seen.add(edge)
                    out.append(edge)
        raw.append(out)
    return NavAutomaton(
        initial=0,
        finals=frozenset(finals),
        transitions=tuple(tuple(ts) for ts in raw),
        thompson_states=len(t.edges),
    )


def determinize(a: NavAutomaton) -> tuple[int, dict[int, dict[NavLabel, int]], set[int]]:
    """Subset construction over predicate/wildcard labels (tests/actions free).

    Returns ``(initial, delta, finals)`` of a DFA whose symbols are the
    forward predicate labels plus the wildcard, which here stands for "any
    other predicate".  Used to cross-check direct NFA simulation.
    """
    preds = sorted(
        {l.uri for l in a.labels() if isinstance(l, PredLabel) and not l.inverse}
    )

    def step(states: frozenset[int], sym: Uri | None) -> frozenset[int]:
        out = set()
        for q in states:
            for label, dst in a.transitions[q]:
                if isinstance(label, WildcardLabel) or (
                    sym is not None
                    and isinstance(label, PredLabel)
                    and not label.inverse
                    and label.uri == sym
                ):
                    out.add(dst)
        return frozenset(a._free_closure(out))

    start = frozenset(a._free_closure({a.initial}))
    ids = {start: 0}
    delta: dict[int, dict] = {}
    finals: set[int] = set()
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        cid = ids[cur]
        if cur & a.finals:
            finals.add(cid)
        delta[cid] = {}
        for sym in [*preds, None]:
            nxt = step(cur, sym)
            if nxt not in ids:
                ids[nxt] = len(ids)
                queue.append(nxt)
            key = PredLabel(sym) if sym is not None else WildcardLabel()
            delta[cid][key] = ids[nxt]
    return 0, delta, finals


def dfa_accepts(dfa: tuple[int, dict[int, dict[NavLabel, int]], set[int]], word: Iterable[Uri]) -> bool:
    start, delta, finals = dfa
    q = start
    for sym in word:
        q = delta[q].get(PredLabel(sym), delta[q][WildcardLabel()])
    return q in finals
