"""Evaluation of path expressions over a Web of Data instance.

Two evaluators live here.  :func:`eval_reference` follows the formal
semantics rule by rule, recursing over the expression tree.
:func:`eval_engine` is the production engine: it compiles the expression to
a :class:`~nautilod.automaton.NavAutomaton` and walks ``(uri, state)`` pairs
breadth-first, dereferencing each URI at most once and honouring the
network limits in :class:`~nautilod.network.NetworkParams`.

Shared conventions:

* links are followed in their declared direction only; ``^p`` follows
  ``p`` backwards and ``p|^p`` gives both directions;
* literals are terminal: they can be results but nothing is evaluated on
  them (tests are false, actions do not fire, no links leave them);
* an action fires at every URI where evaluation reaches it, at most once per
  (occurrence in the expression, target URI), whether or not the path
  later completes.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import expr as ast
from .actions import ActionContext, ActionRecord, ActionRegistry, graph_store
from .automaton import (
    ActionLabel,
    NavAutomaton,
    PredLabel,
    TestLabel,
    WildcardLabel,
    build_automaton,
)
from .expr import ActionSpec, PathExpr
from .network import (
    OK,
    SKIPPED,
    TIMEOUT,
    FetchRecord,
    HostError,
    NetworkParams,
    RunningTotals,
    check_net,
    fetch,
    host_of,
)
from .query import Diagnostics, eval_ask, eval_select
from .rdf import Description, Literal, Term, Uri, WebInstance, term_sort_key


@dataclass(frozen=True)
class LookupPair:
    uri: Uri
    state: int


@dataclass
class NavResult:
    uris: set[Uri] = field(default_factory=set)
    literals: set[Literal] = field(default_factory=set)
    actions: list[ActionRecord] = field(default_factory=list)
    partial: bool = False
    stop_reason: str | None = None

    @property
    def terms(self) -> set[Term]:
        return set(self.uris) | set(self.literals)

    def action_pairs(self) -> set[tuple[str, Uri]]:
        return {r.key for r in self.actions}

    def sorted_terms(self) -> list[Term]:
        return sorted(self.terms, key=term_sort_key)

    def mark_partial(self, reason: str) -> None:
        self.partial = True
        if self.stop_reason is None:
            self.stop_reason = reason


@dataclass
class RunMetrics:
    """Cost breakdown of one run; durations are in seconds."""

    elapsed: float = 0.0
    time_navigation: float = 0.0
    time_tests: float = 0.0
    time_actions: float = 0.0
    uris_dereferenced: int = 0
    fetches: int = 0
    triples: int = 0
    bytes: int = 0
    pairs_processed: int = 0
    tests_evaluated: int = 0
    actions_executed: int = 0
    skipped: int = 0
    fetch_log: list[FetchRecord] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict[str, str]:
        return {
            "elapsed": f"{self.elapsed:.6f}",
            "timeNavigation": f"{self.time_navigation:.6f}",
            "timeTests": f"{self.time_tests:.6f}",
            "timeActions": f"{self.time_actions:.6f}",
            "urisDereferenced": str(self.uris_dereferenced),
            "fetches": str(self.fetches),
            "triplesRetrieved": str(self.triples),
            "bytes": str(self.bytes),
            "pairsProcessed": str(self.pairs_processed),
            "testsEvaluated": str(self.tests_evaluated),
            "actionsExecuted": str(self.actions_executed),
            "skipped": str(self.skipped),
        }


class ActionLog:
    """Runs actions at most once per (occurrence, target) and logs them."""

    def __init__(self, registry: ActionRegistry | None, context: ActionContext | None) -> None:
        self.registry = registry
        self.context = context or ActionContext()
        self.done: set[tuple[int, Uri]] = set()
        self.records: list[ActionRecord] = []

    def fire(self, spec: ActionSpec, occurrence: int, target: Uri, desc: Description,
             diagnostics: Diagnostics | None = None) -> ActionRecord | None:
        key = (occurrence, target)
        if key in self.done:
            return None
        self.done.add(key)
        bindings = eval_select(spec.query, desc, diagnostics)
        if self.registry is None:
            rec = ActionRecord(spec.procedure, target, tuple(bindings), "ok", occurrence)
        else:
            rec = self.registry.run(spec.procedure, target, bindings, self.context, occurrence)
        self.records.append(rec)
        return rec


def _check_actions(e: PathExpr, registry: ActionRegistry | None) -> None:
    if registry is not None:
        registry.check(ast.action_names(e))


# --------------------------------------------------------------------------
# reference evaluator


def eval_reference(
    e: PathExpr,
    seed: Uri,
    w: WebInstance,
    actions: ActionRegistry | None = None,
    context: ActionContext | None = None,
) -> NavResult:
    """Evaluate ``e`` from ``seed`` by structural recursion over the expression.

    Star and plus are computed as least fixpoints over the reached terms.
    Results of a sub-expression at a term are memoised, which is sound
    because the web is a static snapshot and action firing is idempotent.
    """
    _check_actions(e, actions)
    occ = ast.occurrence_ids(e)
    log = ActionLog(actions, context)
    memo: dict[tuple[int, Term], frozenset[Term]] = {}

    def closure(inner: PathExpr, start: Iterable[Term]) -> set[Term]:
        reached = set(start)
        todo = deque(reached)
        while todo:
            x = todo.popleft()
            for y in ev(inner, x):
                if y not in reached:
                    reached.add(y)
                    todo.append(y)
        return reached

    def ev(node: PathExpr, u: Term) -> frozenset[Term]:
        key = (id(node), u)
        hit = memo.get(key)
        if hit is None:
            hit = memo[key] = frozenset(step(node, u))
        return hit

    def step(node: PathExpr, u: Term) -> set[Term]:
        if isinstance(node, ast.Optional):
            return {u} | ev(node.inner, u)
        if isinstance(node, ast.Star):
            return closure(node.inner, [u])
        if isinstance(node, ast.Plus):
            return closure(node.inner, ev(node.inner, u))
        if isinstance(node, ast.Alt):
            return ev(node.left, u) | ev(node.right, u)
        if isinstance(node, ast.Concat):
            out: set[Term] = set()
            for x in ev(node.left, u):
                out |= ev(node.right, x)
            return out
        if isinstance(node, ast.Test):
            return {
                x for x in ev(node.inner, u)
                if isinstance(x, Uri) and eval_ask(node.spec.query, w.resolve(x))
            }
        if isinstance(u, Literal):
            return set()  # no link leaves a literal and no action fires on it
        if isinstance(node, ast.Pred):
            return {t.object for t in w.resolve(u).match(subject=u, predicate=node.uri)}
        if isinstance(node, ast.InversePred):
            return {t.subject for t in w.resolve(u).match(predicate=node.uri, obj=u)}
        if isinstance(node, ast.Wildcard):
            return {t.object for t in w.resolve(u).match(subject=u)}
        if isinstance(node, ast.Action):
            log.fire(node.spec, occ[id(node)], u, w.resolve(u))
            return {u}
        raise TypeError(f"not a path expression: {node!r}")

    reached = ev(e, seed)
    return NavResult(
        uris={x for x in reached if isinstance(x, Uri)},
        literals={x for x in reached if isinstance(x, Literal)},
        actions=log.records,
    )


# --------------------------------------------------------------------------
# automaton-driven engine


def navigate(p: LookupPair, a: NavAutomaton, desc: Description) -> list[tuple[Term, int]]:
    """Follow every predicate label leaving ``p.state`` through ``desc``."""
    out: dict[tuple[Term, int], None] = {}
    for label in a.next_p(p.state):
        if isinstance(label, WildcardLabel):
            matches = [t.object for t in desc.match(subject=p.uri)]
        elif label.inverse:
            matches = [t.subject for t in desc.match(predicate=label.uri, obj=p.uri)]
        else:
            matches = [t.object for t in desc.match(subject=p.uri, predicate=label.uri)]
        targets = sorted(a.next_states(p.state, label))
        for x in sorted(matches, key=term_sort_key):
            for q in targets:
                out.setdefault((x, q))
    return list(out)


def eval_engine(
    e: PathExpr,
    seed: Uri,
    w: WebInstance,
    params: NetworkParams | None = None,
    actions: ActionRegistry | None = None,
    context: ActionContext | None = None,
    *,
    automaton: NavAutomaton | None = None,
    on_pair: Callable[[LookupPair], None] | None = None,
) -> tuple[NavResult, RunMetrics]:
    """Breadth-first navigation of ``(uri, state)`` pairs from ``(seed, q0)``.

    A global limit (``timeout``, ``maxSize``) ends the run early; a skipped
    dereference (``domains``, ``maxDerTriples``, ``timeoutDer``) treats
    that URI's description as empty.  Either way the results gathered so
    far are returned.  Only skips caused by size or time limits mark the
    result partial: a ``domains`` filter changes the web being navigated
    rather than cutting a run short.
    """
    params = params or NetworkParams()
    _check_actions(e, actions)
    a = automaton or build_automaton(e)
    context = context or ActionContext(params=params, web=w)
    log = ActionLog(actions, context)
    diagnostics = Diagnostics()
    result = NavResult(actions=log.records)
    metrics = RunMetrics()
    totals = RunningTotals()
    started = totals.started
    descriptions: dict[Uri, Description] = {}
    store = graph_store(context.graph_dir) if params.save_graph and context.graph_dir else None

    def describe(uri: Uri) -> Description:
        desc = descriptions.get(uri)
        if desc is not None:
            return desc
        try:
            host: str | None = host_of(uri)
        except HostError:
            host = None
        totals.candidate_host = host
        decision = check_net(params, totals)
        totals.candidate_host = None
        if decision.action == "skip" or host is None:
            rec = FetchRecord(uri, SKIPPED, reason=decision.reason or "authority")
            desc = Description(uri)
        else:
            desc, rec = fetch(w, uri, params)
            totals.bytes_transferred += rec.bytes
            metrics.bytes += rec.bytes
        metrics.fetch_log.append(rec)
        if rec.status == OK or rec.cached:
            metrics.fetches += 1
        if rec.status in (SKIPPED, TIMEOUT):
            metrics.skipped += 1
            if rec.reason in ("maxDerTriples", "timeoutDer"):
                result.mark_partial(rec.reason)
        if desc:
            metrics.uris_dereferenced += 1
            metrics.triples += len(desc)
            if store is not None:
                store.save(desc)
        descriptions[uri] = desc
        return desc

    queue: deque[LookupPair] = deque([LookupPair(seed, a.get_initial())])
    visited: set[LookupPair] = set()
    while queue:
        decision = check_net(params, totals)
        if decision.action == "stop":
            result.mark_partial(decision.reason or "stop")
            break
        p = queue.popleft()
        if p in visited:
            continue
        visited.add(p)
        metrics.pairs_processed += 1
        if on_pair is not None:
            on_pair(p)
        if a.is_final(p.state):
            result.uris.add(p.uri)

        t0 = time.perf_counter()
        desc = describe(p.uri)
        metrics.time_navigation += time.perf_counter() - t0

        tests = a.get_tests(p.state)
        if tests:
            t0 = time.perf_counter()
            for t in tests:
                metrics.tests_evaluated += 1
                if eval_ask(t.spec.query, desc, diagnostics):
                    for q in sorted(a.next_states(p.state, t)):
                        queue.append(LookupPair(p.uri, q))
            metrics.time_tests += time.perf_counter() - t0

        pending = a.get_actions(p.state)
        if pending:
            t0 = time.perf_counter()
            for act in pending:
                if log.fire(act.spec, act.occurrence, p.uri, desc, diagnostics) is not None:
                    metrics.actions_executed += 1
                for q in sorted(a.next_states(p.state, act)):
                    queue.append(LookupPair(p.uri, q))
            metrics.time_actions += time.perf_counter() - t0

        t0 = time.perf_counter()
        for x, q in navigate(p, a, desc):
            if isinstance(x, Literal):
                if a.is_final(q):
                    result.literals.add(x)
            else:
                queue.append(LookupPair(x, q))
        metrics.time_navigation += time.perf_counter() - t0

    metrics.elapsed = time.perf_counter() - started
    return result, metrics


def expand_pair(
    a: NavAutomaton,
    p: LookupPair,
    desc: Description,
    log: ActionLog,
    diagnostics: Diagnostics | None = None,
) -> tuple[list[LookupPair], list[tuple[Term, int]]]:
    """One engine step without a frontier: same-URI successors and link targets.

    Used by the distributed engines, which own the frontier themselves.
    """
    local: list[LookupPair] = []
    for t in a.get_tests(p.state):
        if eval_ask(t.spec.query, desc, diagnostics):
            local.extend(LookupPair(p.uri, q) for q in sorted(a.next_states(p.state, t)))
    for act in a.get_actions(p.state):
        log.fire(act.spec, act.occurrence, p.uri, desc, diagnostics)
        local.extend(LookupPair(p.uri, q) for q in sorted(a.next_states(p.state, act)))
    return local, navigate(p, a, desc)


__all__ = [
    "LookupPair",
    "NavResult",
    "RunMetrics",
    "ActionRecord",
    "eval_reference",
    "eval_engine",
    "navigate",
    "expand_pair",
]
