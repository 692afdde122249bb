"""Dswget over TCP: one connection per message, asyncio on both ends.

Run engines from a config whose lines carry addresses::

    python -m nautilod.dswget.tcp serve engines.conf
    python -m nautilod.dswget.tcp query engines.conf <seed> '<expression>'
"""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import logging
import sys
import uuid
from typing import Mapping

from ..actions import ActionContext, ActionRegistry
from ..automaton import build_automaton
from ..evaluator import NavResult
from ..expr import PathExpr, parse, pretty_print
from ..rdf import Uri, WebInstance
from .client import ClientTracker, DswgetError
from .config import EngineConfig, load_config, load_stores
from .engine import Engine, authority
from .messages import DELEGATE, MAX_MESSAGE_BYTES, PROGRESS, RESULT, DswgetMessage, WireError, decode, encode

log = logging.getLogger(__name__)

Address = tuple[str, int]


async def read_message(reader: asyncio.StreamReader) -> DswgetMessage:
    lines: list[str] = []
    size = 0
    while True:
        raw = await reader.readline()
        if not raw:
            raise WireError("connection closed before END")
        size += len(raw)
        if size > MAX_MESSAGE_BYTES:
            raise WireError("message exceeds the size limit")
        line = raw.decode("utf-8")
        lines.append(line)
        if line.rstrip("\r\n") == "END":
            return decode("".join(lines))


async def send_message(addr: Address, msg: DswgetMessage, timeout: float = 5.0) -> None:
    reader, writer = await asyncio.wait_for(asyncio.open_connection(*addr), timeout)
    try:
        writer.write(encode(msg).encode("utf-8"))
        await asyncio.wait_for(writer.drain(), timeout)
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except OSError:
            pass


class _Listener:
    """Accepts connections and queues decoded messages for one consumer."""

    def __init__(self) -> None:
        self.queue: asyncio.Queue[DswgetMessage] = asyncio.Queue()
        self.server: asyncio.base_events.Server | None = None

    async def _on_connect(self, reader, writer) -> None:
        try:
            self.queue.put_nowait(await read_message(reader))
        except (WireError, UnicodeDecodeError, ConnectionError) as exc:
            log.warning("dropping malformed message: %s", exc)
        finally:
            writer.close()

    async def start(self, host: str, port: int) -> Address:
        self.server = await asyncio.start_server(self._on_connect, host, port)
        sock = self.server.sockets[0].getsockname()
        return sock[0], sock[1]

    async def close(self) -> None:
        if self.server is not None:
            self.server.close()
            await self.server.wait_closed()


def _client_address(client_id: str) -> Address:
    host, _, port = client_id.rpartition(":")
    return host, int(port)


class TcpEngine:
    """Serves one :class:`Engine`; messages are handled one at a time."""

    def __init__(self, engine: Engine, directory: Mapping[str, Address]) -> None:
        self.engine = engine
        self.directory = dict(directory)
        self.listener = _Listener()
        self._worker: asyncio.Task | None = None

    async def start(self, host: str, port: int) -> Address:
        addr = await self.listener.start(host, port)
        self._worker = asyncio.create_task(self._run())
        return addr

    async def _run(self) -> None:
        while True:
            msg = await self.listener.queue.get()
            await self._dispatch(self.engine.handle(msg))

    async def _dispatch(self, outgoing: list[tuple[str | None, DswgetMessage]]) -> None:
        failed: list[tuple[str, str]] = []
        stranded: list[Uri] = []  # final-state URIs nobody else will report
        for host, msg in outgoing:
            if host is None:
                continue
            try:
                await send_message(self.directory[host], msg)
            except (OSError, asyncio.TimeoutError) as exc:
                log.warning("engine for %s unreachable: %s", host, exc)
                failed.append((msg.msg_id, host))
                a = self.engine.requests[msg.request_id].automaton
                stranded.extend(u for u, q in msg.pairs if a.is_final(q))
        for host, msg in outgoing:
            if host is not None:
                continue
            if msg.kind == RESULT and stranded:
                msg = dataclasses.replace(msg, results=tuple(dict.fromkeys(msg.results + tuple(stranded))))
            if msg.kind == PROGRESS and failed:
                lost = {m for m, _ in failed}
                msg = dataclasses.replace(
                    msg,
                    spawned=tuple(s for s in msg.spawned if s[0] not in lost),
                    unreachable=msg.unreachable + tuple(failed),
                )
            try:
                await send_message(_client_address(msg.client_id), msg)
            except (OSError, ValueError, asyncio.TimeoutError) as exc:
                log.warning("client %s unreachable: %s", msg.client_id, exc)

    async def close(self) -> None:
        if self._worker is not None:
            self._worker.cancel()
        await self.listener.close()


async def start_engines(
    configs: list[EngineConfig],
    stores: Mapping[str, WebInstance] | None = None,
    *,
    only: set[str] | None = None,
    actions: ActionRegistry | None = None,
    context: ActionContext | None = None,
) -> list[TcpEngine]:
    """Start the configured engines (all, or those named in ``only``)."""
    directory = {c.host: c.address for c in configs if c.address is not None}
    if len(directory) != len(configs):
        raise DswgetError("every engine needs an address in TCP mode")
    stores = stores or load_stores(configs)
    running = []
    for c in configs:
        if only and c.host not in only:
            continue
        engine = Engine(
            c.host, [c.host], stores[c.host],
            has_engine=directory.__contains__, actions=actions, context=context,
        )
        node = TcpEngine(engine, directory)
        await node.start(*c.address)
        running.append(node)
    return running


async def submit(
    e: PathExpr,
    seed: Uri,
    directory: Mapping[str, Address],
    *,
    timeout: float = 30.0,
    bind: str = "127.0.0.1",
) -> tuple[NavResult, ClientTracker]:
    """Client side: send the root delegation and wait for completion."""
    host = authority(seed)
    if host not in directory:
        raise DswgetError(f"no engine owns the seed host of {seed.value}")
    listener = _Listener()
    addr = await listener.start(bind, 0)
    client_id = f"{addr[0]}:{addr[1]}"
    request_id = uuid.uuid4().hex[:12]
    root = f"client-{request_id}-0"
    tracker = ClientTracker(request_id, root)
    try:
        await send_message(directory[host], DswgetMessage(
            DELEGATE, request_id, client_id, root,
            expression=pretty_print(e), pairs=((seed, build_automaton(e).get_initial()),),
        ))
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while not tracker.complete:
            remaining = deadline - loop.time()
            if remaining <= 0:
                tracker.result.mark_partial("timeout")
                break
            try:
                msg = await asyncio.wait_for(listener.queue.get(), remaining)
            except asyncio.TimeoutError:
                continue
            tracker.receive(msg)
    finally:
        await listener.close()
    return tracker.result, tracker


def run_submit(config_path, seed: Uri, e: PathExpr, timeout: float = 30.0) -> tuple[NavResult, ClientTracker]:
    configs = load_config(config_path)
    directory = {c.host: c.address for c in configs if c.address is not None}
    return asyncio.run(submit(e, seed, directory, timeout=timeout))


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m nautilod.dswget.tcp")
    sub = ap.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("serve", help="run the engines listed in a config")
    s.add_argument("config")
    s.add_argument("--only", action="append", help="run only this host's engine")
    q = sub.add_parser("query", help="submit one request and print the results")
    q.add_argument("config")
    q.add_argument("seed")
    q.add_argument("expression")
    q.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    if args.cmd == "serve":
        async def serve() -> None:
            nodes = await start_engines(
                load_config(args.config),
                only=set(args.only) if args.only else None,
                actions=ActionRegistry.with_builtins(),
            )
            log.info("%d engine(s) listening", len(nodes))
            await asyncio.Event().wait()

        try:
            asyncio.run(serve())
        except KeyboardInterrupt:
            pass
        return 0

    result, _ = run_submit(args.config, Uri(args.seed), parse(args.expression), args.timeout)
    for t in result.sorted_terms():
        print(t.n3())
    return 3 if result.partial else 0


if __name__ == "__main__":
    sys.exit(main())
