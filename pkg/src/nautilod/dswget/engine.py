"""A Dswget engine: evaluates the pairs it owns, delegates the rest."""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from ..actions import ActionContext, ActionRegistry
from ..automaton import NavAutomaton, build_automaton
from ..evaluator import ActionLog, LookupPair, expand_pair
from ..expr import ExprSyntaxError, action_names, parse
from ..network import HostError, host_of
from ..query import Diagnostics, QueryError
from ..rdf import Literal, Term, Uri, WebInstance
from .messages import DELEGATE, ERROR, PROGRESS, RESULT, DswgetMessage


class ProtocolError(Exception):
    pass


def authority(uri: Uri) -> str | None:
    """Host owning ``uri``, or ``None`` for URIs without an authority."""
    try:
        return host_of(uri)
    except HostError:
        return None


@dataclass
class _Request:
    automaton: NavAutomaton
    log: ActionLog
    visited: set[LookupPair] = field(default_factory=set)
    shipped_actions: int = 0


class Engine:
    """Per-server engine.

    ``handle`` never blocks on other engines: it returns the messages to
    send and lets the transport deliver them.  ``has_engine`` tells the
    engine which foreign hosts can receive a delegation.
    """

    def __init__(
        self,
        engine_id: str,
        hosts: Iterable[str],
        store: WebInstance,
        *,
        has_engine: Callable[[str], bool] = lambda host: False,
        actions: ActionRegistry | None = None,
        context: ActionContext | None = None,
    ) -> None:
        self.engine_id = engine_id
        self.hosts = frozenset(h.lower() for h in hosts)
        self.store = store
        self.has_engine = has_engine
        self.actions = actions
        self.context = context or ActionContext(web=store)
        self.requests: dict[str, _Request] = {}
        self.processed: Counter[tuple[str, LookupPair]] = Counter()
        self.handled = 0
        self._ids = itertools.count(1)

    def owns(self, uri: Uri) -> bool:
        host = authority(uri)
        return host is None or host in self.hosts

    def _next_id(self) -> str:
        return f"{self.engine_id}-{next(self._ids)}"

    def _request(self, msg: DswgetMessage) -> _Request:
        req = self.requests.get(msg.request_id)
        if req is None:
            if msg.expression is None:
                raise ProtocolError("delegation without an expression")
            e = parse(msg.expression, {})
            if self.actions is not None:
                self.actions.check(action_names(e))
            req = _Request(build_automaton(e), ActionLog(self.actions, self.context))
            self.requests[msg.request_id] = req
        return req

    def handle(self, msg: DswgetMessage) -> list[tuple[str | None, DswgetMessage]]:
        """Process one DELEGATE; return ``(destination host or None for client, message)``.

        Every DELEGATE is answered with exactly one RESULT and one PROGRESS
        to the client, so the client can tell when all work is accounted for.
        """
        self.handled += 1
        if msg.kind != DELEGATE:
            return [(None, self._error(msg, f"engine cannot handle {msg.kind}"))]
        foreign = [u.value for u, _ in msg.pairs if not self.owns(u)]
        if foreign:
            return [(None, self._error(msg, f"pairs not owned by {self.engine_id}: {foreign[0]}"))]
        try:
            req = self._request(msg)
        except (ExprSyntaxError, QueryError, ProtocolError, ValueError) as exc:
            return [(None, self._error(msg, f"cannot evaluate expression: {exc}"))]

        a = req.automaton
        diagnostics = Diagnostics()
        results: dict[Term, None] = {}
        states: dict[int, None] = {}
        batches: dict[str, dict[LookupPair, None]] = defaultdict(dict)
        unreachable: list[tuple[str, str]] = []
        queue = deque(LookupPair(u, q) for u, q in msg.pairs)
        while queue:
            p = queue.popleft()
            if p in req.visited:
                continue
            req.visited.add(p)
            self.processed[(msg.request_id, p)] += 1
            states.setdefault(p.state)
            if a.is_final(p.state):
                results.setdefault(p.uri)
            local, links = expand_pair(a, p, self.store.resolve(p.uri), req.log, diagnostics)
            queue.extend(local)
            for x, q in links:
                if isinstance(x, Literal):
                    if a.is_final(q):
                        results.setdefault(x)
                    continue
                pair = LookupPair(x, q)
                if self.owns(x):
                    queue.append(pair)
                    continue
                host = authority(x)
                if self.has_engine(host):
                    batches[host].setdefault(pair)
                else:
                    # nobody can expand it: report it if it already is a result
                    if a.is_final(q):
                        results.setdefault(x)
                    unreachable.append(("-", host))

        out: list[tuple[str | None, DswgetMessage]] = []
        spawned: list[tuple[str, str]] = []
        for host in sorted(batches):
            mid = self._next_id()
            spawned.append((mid, host))
            out.append((host, DswgetMessage(
                DELEGATE, msg.request_id, msg.client_id, mid,
                expression=msg.expression,
                pairs=tuple((p.uri, p.state) for p in batches[host]),
                engine_id=self.engine_id,
            )))
        new_actions = tuple(req.log.records[req.shipped_actions:])
        req.shipped_actions = len(req.log.records)
        out.append((None, DswgetMessage(
            RESULT, msg.request_id, msg.client_id, self._next_id(),
            results=tuple(results), actions=new_actions,
            engine_id=self.engine_id, done=msg.msg_id,
        )))
        out.append((None, DswgetMessage(
            PROGRESS, msg.request_id, msg.client_id, self._next_id(),
            engine_id=self.engine_id, done=msg.msg_id, result_messages=1,
            states=tuple(sorted(states)), spawned=tuple(spawned),
            unreachable=tuple(sorted(set(unreachable))),
        )))
        return out

    def _error(self, msg: DswgetMessage, reason: str) -> DswgetMessage:
        return DswgetMessage(
            ERROR, msg.request_id, msg.client_id, self._next_id(),
            engine_id=self.engine_id, done=msg.msg_id, error=reason,
        )
