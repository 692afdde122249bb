"""Side-effect procedures attached to expressions.

An action receives the URI it fires on and the bindings of its SELECT
query over that URI's description.  It has no access to the navigation
frontier, so it cannot influence which URIs are visited.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .network import NetworkParams, fetch
from .ntriples import serialize_ntriples
from .rdf import Description, Literal, Term, Triple, Uri, WebInstance


class ActionError(Exception):
    pass


@dataclass(frozen=True)
class ActionRecord:
    procedure: str
    target: Uri
    params: tuple[Mapping[str, Term], ...]
    outcome: str = "ok"  # "ok" or "failed: <reason>"
    occurrence: int = 0

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    @property
    def key(self) -> tuple[str, Uri]:
        return (self.procedure, self.target)


@dataclass
class ActionContext:
    """What built-in actions may touch: sinks, parameters and a read-only web."""

    outbox: Path | None = None
    save_path: Path | None = None
    graph_dir: Path | None = None
    params: NetworkParams = field(default_factory=NetworkParams)
    web: WebInstance | None = None
    collected: list[tuple[Uri, tuple[Mapping[str, Term], ...]]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


ActionImpl = Callable[[Uri, list, ActionContext], None]


class ActionRegistry:
    def __init__(self) -> None:
        self._impls: dict[str, ActionImpl] = {}

    def register(self, name: str, impl: ActionImpl) -> None:
        if name in self._impls:
            raise ActionError(f"action {name!r} is already registered")
        self._impls[name] = impl

    def __contains__(self, name: object) -> bool:
        return name in self._impls

    def names(self) -> list[str]:
        return sorted(self._impls)

    def get(self, name: str) -> ActionImpl:
        try:
            return self._impls[name]
        except KeyError:
            raise ActionError(f"unknown action {name!r}") from None

    def check(self, names: Iterable[str]) -> None:
        missing = sorted(set(names) - set(self._impls))
        if missing:
            raise ActionError(f"unknown action(s): {', '.join(missing)}")

    def run(
        self, name: str, target: Uri, bindings: list, context: ActionContext, occurrence: int = 0
    ) -> ActionRecord:
        params = tuple(dict(b) for b in bindings)
        try:
            self.get(name)(target, list(params), context)
        except Exception as exc:  # one failing action must not abort the run
            return ActionRecord(name, target, params, f"failed: {exc}", occurrence)
        return ActionRecord(name, target, params, "ok", occurrence)

    @classmethod
    def with_builtins(cls) -> "ActionRegistry":
        reg = cls()
        reg.register("collect", collect)
        reg.register("save", save)
        reg.register("outboxNotify", outbox_notify)
        reg.register("sendEmail", outbox_notify)
        reg.register("getGraph", get_graph)
        reg.register("noop", noop)
        return reg


def noop(target: Uri, bindings: list, ctx: ActionContext) -> None:
    return None


def collect(target: Uri, bindings: list, ctx: ActionContext) -> None:
    with ctx.lock:
        ctx.collected.append((target, tuple(bindings)))


def _format_binding(b: Mapping[str, Term]) -> str:
    return "\t".join(f"?{k}={v.n3()}" for k, v in sorted(b.items()))


def outbox_notify(target: Uri, bindings: list, ctx: ActionContext) -> None:
    """Append one message line per binding to the outbox file."""
    if ctx.outbox is None:
        raise ActionError("no outbox configured")
    with ctx.lock:
        ctx.outbox.parent.mkdir(parents=True, exist_ok=True)
        with ctx.outbox.open("a", encoding="utf-8") as fh:
            for b in bindings:
                fh.write(f"{target.n3()}\t{_format_binding(b)}\n")


VAR_NS = "urn:nautilod:var:"


def binding_triples(target: Uri, bindings: Iterable[Mapping[str, Term]]) -> list[Triple]:
    """Triples for saved bindings.

    A binding of ``?s ?p ?o`` is written as that triple; any other binding
    becomes one ``<target> <urn:nautilod:var:NAME> value`` triple per variable.
    """
    out: list[Triple] = []
    for b in bindings:
        s, p, o = b.get("s"), b.get("p"), b.get("o")
        if set(b) == {"s", "p", "o"} and isinstance(s, Uri) and isinstance(p, Uri):
            out.append(Triple(s, p, o))
            continue
        for name, value in sorted(b.items()):
            out.append(Triple(target, Uri(VAR_NS + name), value))
    return out


def save(target: Uri, bindings: list, ctx: ActionContext) -> None:
    if ctx.save_path is None:
        raise ActionError("no save file configured")
    with ctx.lock:
        ctx.save_path.parent.mkdir(parents=True, exist_ok=True)
        with ctx.save_path.open("a", encoding="utf-8") as fh:
            fh.write(serialize_ntriples(binding_triples(target, bindings)))


class GraphStore:
    """Directory of one N-Triples file per URI plus a reloadable manifest."""

    MANIFEST = "manifest.tsv"

    def __init__(self, directory: Path) -> None:
        self.directory = Path(directory)
        self._lock = threading.Lock()
        self._saved: dict[Uri, str] = {}

    def save(self, desc: Description) -> Path | None:
        with self._lock:
            if desc.source in self._saved:
                return self.directory / self._saved[desc.source]
            self.directory.mkdir(parents=True, exist_ok=True)
            name = f"g{len(self._saved):05d}.nt"
            (self.directory / name).write_text(serialize_ntriples(desc), encoding="utf-8")
            self._saved[desc.source] = name
            with (self.directory / self.MANIFEST).open("a", encoding="utf-8") as fh:
                fh.write(f"{desc.source.value}\t{name}\n")
            return self.directory / name

    @property
    def manifest(self) -> Path:
        return self.directory / self.MANIFEST


_graph_stores: dict[Path, GraphStore] = {}
_graph_stores_lock = threading.Lock()


def graph_store(directory: Path) -> GraphStore:
    key = Path(directory).resolve()
    with _graph_stores_lock:
        store = _graph_stores.get(key)
        if store is None:
            store = _graph_stores[key] = GraphStore(key)
        return store


def get_graph(target: Uri, bindings: list, ctx: ActionContext) -> None:
    """Dereference every bound URI; persist descriptions when saveGraph is on."""
    if ctx.web is None:
        raise ActionError("getGraph needs a web instance")
    for b in bindings:
        for value in b.values():
            if isinstance(value, Literal):
                continue
            desc, _ = fetch(ctx.web, value, ctx.params)
            if ctx.params.save_graph and ctx.graph_dir is not None and desc:
                graph_store(ctx.graph_dir).save(desc)
