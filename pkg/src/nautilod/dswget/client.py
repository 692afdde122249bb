"""Dswget client side: completion tracking and an in-process engine network."""

from __future__ import annotations

import itertools
import random
import uuid
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from ..actions import ActionContext, ActionRecord, ActionRegistry
from ..automaton import build_automaton
from ..evaluator import NavResult
from ..expr import PathExpr, pretty_print
from ..rdf import Description, FixtureWeb, Literal, Uri, WebInstance
from .engine import Engine, authority
from .messages import DELEGATE, ERROR, PROGRESS, RESULT, DswgetMessage, decode, encode


class DswgetError(ValueError):
    pass


@dataclass
class ClientTracker:
    """Collects RESULT/PROGRESS messages of one request and detects completion.

    Every DELEGATE is answered by one PROGRESS naming the delegations it
    spawned and how many RESULT messages it sent.  The request is complete
    once every delegation known so far (the root plus all spawned ones) has
    its PROGRESS and the announced RESULTs have all arrived.  The rule does
    not depend on arrival order.
    """

    request_id: str
    root: str
    expected: set[str] = field(default_factory=set)
    done: set[str] = field(default_factory=set)
    results_announced: dict[str, int] = field(default_factory=dict)
    results_seen: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    engines: set[str] = field(default_factory=set)
    last_states: dict[str, tuple[int, ...]] = field(default_factory=dict)
    unreachable: list[tuple[str, str]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    result: NavResult = field(default_factory=NavResult)
    sources: dict = field(default_factory=lambda: defaultdict(set))  # term -> engines reporting it
    _seen_msgs: set[str] = field(default_factory=set)
    _action_keys: set[tuple[str, int, Uri]] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.expected.add(self.root)

    def receive(self, msg: DswgetMessage) -> None:
        if msg.request_id != self.request_id:
            return
        if msg.msg_id in self._seen_msgs:
            return  # duplicate delivery
        self._seen_msgs.add(msg.msg_id)
        if msg.engine_id:
            self.engines.add(msg.engine_id)
        if msg.kind == RESULT:
            for t in msg.results:
                (self.result.literals if isinstance(t, Literal) else self.result.uris).add(t)
                self.sources[t].add(msg.engine_id)
            for rec in msg.actions:
                key = (rec.procedure, rec.occurrence, rec.target)
                if key not in self._action_keys:
                    self._action_keys.add(key)
                    self.result.actions.append(rec)
            if msg.done:
                self.results_seen[msg.done] += 1
        elif msg.kind == PROGRESS:
            if msg.done:
                self.done.add(msg.done)
                self.results_announced[msg.done] = msg.result_messages
            if msg.engine_id:
                self.last_states[msg.engine_id] = msg.states
            self.expected.update(mid for mid, _ in msg.spawned)
            if msg.unreachable:
                self.unreachable.extend(msg.unreachable)
                self.result.mark_partial("unreachable")
        elif msg.kind == ERROR:
            self.errors.append(msg.error or "error")
            self.result.mark_partial("error")
            if msg.done:
                self.done.add(msg.done)
                self.results_announced[msg.done] = 0

    @property
    def complete(self) -> bool:
        if not self.expected <= self.done:
            return False
        return all(self.results_seen.get(m, 0) >= n for m, n in self.results_announced.items())


def partition_by_host(web: FixtureWeb) -> dict[str, FixtureWeb]:
    """Split a fixture web into one store per URI host."""
    parts: dict[str, dict[Uri, Description]] = defaultdict(dict)
    for uri, desc in web.descriptions.items():
        host = authority(uri)
        if host is None:
            raise DswgetError(f"cannot assign {uri.value} to a host")
        parts[host][uri] = desc
    return {h: FixtureWeb(d) for h, d in parts.items()}


@dataclass
class NetworkStats:
    delegates: int = 0
    messages: int = 0
    delegate_pairs: list[int] = field(default_factory=list)


class LocalNetwork:
    """Engines wired through an in-process message bus.

    Every message is serialized to the wire format and parsed back on
    delivery.  With ``shuffle`` set, pending messages are delivered in a
    seeded random order instead of FIFO.
    """

    CLIENT = "client"

    def __init__(
        self,
        stores: Mapping[str, WebInstance],
        *,
        actions: ActionRegistry | None = None,
        context: ActionContext | None = None,
        groups: Mapping[str, list[str]] | None = None,
    ) -> None:
        """``stores`` maps engine id to its store; ``groups`` maps engine id to
        the hosts it owns (default: the engine id is its only host)."""
        groups = dict(groups or {eid: [eid] for eid in stores})
        self.host_to_engine: dict[str, str] = {}
        for eid, hosts in groups.items():
            for h in hosts:
                if h.lower() in self.host_to_engine:
                    raise DswgetError(f"host {h} is assigned to two engines")
                self.host_to_engine[h.lower()] = eid
        self.engines: dict[str, Engine] = {
            eid: Engine(
                eid, groups[eid], store,
                has_engine=self.host_to_engine.__contains__,
                actions=actions, context=context,
            )
            for eid, store in stores.items()
        }
        self.pending: list[tuple[str, str]] = []  # (destination, wire text)
        self.stats = NetworkStats()
        self._requests = itertools.count(1)

    @classmethod
    def from_web(cls, web: FixtureWeb, hosts: list[str] | None = None, **kw) -> "LocalNetwork":
        parts = partition_by_host(web)
        for h in hosts or []:
            parts.setdefault(h.lower(), FixtureWeb())
        return cls(parts, **kw)

    def engine_for(self, uri: Uri) -> Engine | None:
        host = authority(uri)
        eid = self.host_to_engine.get(host) if host else None
        return self.engines.get(eid) if eid else None

    def _send(self, dest: str, msg: DswgetMessage) -> None:
        self.stats.messages += 1
        if msg.kind == DELEGATE:
            self.stats.delegates += 1
            self.stats.delegate_pairs.append(len(msg.pairs))
        self.pending.append((dest, encode(msg)))

    def pending_engine_work(self) -> int:
        """DELEGATE messages still queued for some engine."""
        return sum(1 for dest, _ in self.pending if dest != self.CLIENT)

    def client_submit(
        self,
        e: PathExpr,
        seed: Uri,
        *,
        shuffle: int | None = None,
        max_steps: int = 1_000_000,
    ) -> NavResult:
        """Run ``e`` from ``seed`` across the engines and assemble the result."""
        first = self.engine_for(seed)
        if first is None:
            raise DswgetError(f"no engine owns the seed host of {seed.value}")
        request_id = f"r{next(self._requests)}-{uuid.uuid4().hex[:8]}"
        root = f"{self.CLIENT}-{request_id}-0"
        a = build_automaton(e)
        tracker = ClientTracker(request_id, root)
        self._send(first.engine_id, DswgetMessage(
            DELEGATE, request_id, self.CLIENT, root,
            expression=pretty_print(e), pairs=((seed, a.get_initial()),),
        ))
        rng = random.Random(shuffle) if shuffle is not None else None
        steps = 0
        while self.pending and not tracker.complete:
            steps += 1
            if steps > max_steps:
                tracker.result.mark_partial("timeout")
                break
            idx = rng.randrange(len(self.pending)) if rng else 0
            dest, wire = self.pending.pop(idx)
            msg = decode(wire)
            if dest == self.CLIENT:
                tracker.receive(msg)
                continue
            for host, out in self.engines[dest].handle(msg):
                target = self.CLIENT if host is None else self.host_to_engine[host]
                self._send(target, out)
        # deliver stragglers addressed to the client (duplicates are ignored)
        for dest, wire in [p for p in self.pending if p[0] == self.CLIENT]:
            tracker.receive(decode(wire))
        self.pending = [p for p in self.pending if p[0] != self.CLIENT]
        if not tracker.complete:
            tracker.result.mark_partial(tracker.result.stop_reason or "incomplete")
        self.last_tracker = tracker
        return tracker.result

    def processed_counts(self, request_id: str | None = None) -> dict[tuple[str, str, str], int]:
        """How often each engine processed each pair (keyed by engine and pair)."""
        out = {}
        for eid, eng in self.engines.items():
            for (rid, pair), n in eng.processed.items():
                if request_id is None or rid == request_id:
                    out[(eid, f"{pair.uri.value}@{pair.state}", rid)] = n
        return out


def records_as_set(records: list[ActionRecord]) -> set[tuple[str, Uri]]:
    return {r.key for r in records}
