"""Dswget message envelope and its line-oriented wire format.

Grammar (one message, UTF-8, ``\\n`` line ends)::

    message  := header NL expr NL body* "END" NL
    header   := "DSWGET/1" SP kind SP requestId SP clientId (SP key "=" value)*
    kind     := "DELEGATE" | "RESULT" | "PROGRESS" | "ERROR"
    expr     := canonical expression text, or "-" when absent
    body     := "P" SP term SP state        ; pair to evaluate (DELEGATE)
              | "R" SP term                 ; result URI or literal (RESULT)
              | "A" SP json                 ; executed action record (RESULT)
              | "S" SP state                ; automaton state operated on (PROGRESS)
              | "D" SP msgId SP host        ; delegation sent (PROGRESS)
              | "X" SP msgId SP host        ; delegation that could not be delivered (PROGRESS)

Header values are percent-encoded.  Known keys: ``msg`` (this message's id),
``engine`` (sender), ``done`` (DELEGATE id this PROGRESS/RESULT answers),
``results`` (RESULT messages sent for ``done``), ``error`` (reason text).
Terms use N-Triples syntax.  A message may not exceed :data:`MAX_MESSAGE_BYTES`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from urllib.parse import quote, unquote

from ..actions import ActionRecord
from ..ntriples import NTriplesError, format_term, parse_term
from ..rdf import RDFError, Term, Uri

MAGIC = "DSWGET/1"
MAX_MESSAGE_BYTES = 8 * 1024 * 1024

DELEGATE = "DELEGATE"
RESULT = "RESULT"
PROGRESS = "PROGRESS"
ERROR = "ERROR"
KINDS = (DELEGATE, RESULT, PROGRESS, ERROR)


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class DswgetMessage:
    kind: str
    request_id: str
    client_id: str
    msg_id: str
    expression: str | None = None
    pairs: tuple[tuple[Uri, int], ...] = ()
    results: tuple[Term, ...] = ()
    actions: tuple[ActionRecord, ...] = ()
    engine_id: str | None = None
    done: str | None = None
    result_messages: int = 0
    states: tuple[int, ...] = ()
    spawned: tuple[tuple[str, str], ...] = ()
    unreachable: tuple[tuple[str, str], ...] = ()
    error: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise WireError(f"unknown message kind {self.kind!r}")
        for name in ("request_id", "client_id", "msg_id"):
            value = getattr(self, name)
            if not value or any(c.isspace() for c in value):
                raise WireError(f"{name} must be a non-empty token")
        if self.expression is not None and ("\n" in self.expression or "\r" in self.expression):
            raise WireError("expression must fit on one line")


def _action_to_json(rec: ActionRecord) -> str:
    return json.dumps(
        {
            "procedure": rec.procedure,
            "target": rec.target.value,
            "params": [{k: format_term(v) for k, v in sorted(b.items())} for b in rec.params],
            "outcome": rec.outcome,
            "occurrence": rec.occurrence,
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def _action_from_json(text: str) -> ActionRecord:
    data = json.loads(text)
    return ActionRecord(
        procedure=data["procedure"],
        target=Uri(data["target"]),
        params=tuple({k: parse_term(v) for k, v in b.items()} for b in data["params"]),
        outcome=data["outcome"],
        occurrence=int(data.get("occurrence", 0)),
    )


def encode(msg: DswgetMessage) -> str:
    header = [MAGIC, msg.kind, msg.request_id, msg.client_id, f"msg={quote(msg.msg_id, safe='')}"]
    extra = {
        "engine": msg.engine_id,
        "done": msg.done,
        "results": str(msg.result_messages) if msg.result_messages else None,
        "error": msg.error,
    }
    header += [f"{k}={quote(v, safe='')}" for k, v in extra.items() if v is not None]
    lines = [" ".join(header), msg.expression if msg.expression is not None else "-"]
    lines += [f"P {format_term(u)} {q}" for u, q in msg.pairs]
    lines += [f"R {format_term(t)}" for t in msg.results]
    lines += [f"A {_action_to_json(a)}" for a in msg.actions]
    lines += [f"S {q}" for q in msg.states]
    lines += [f"D {m} {h}" for m, h in msg.spawned]
    lines += [f"X {m} {h}" for m, h in msg.unreachable]
    lines.append("END")
    text = "\n".join(lines) + "\n"
    if len(text.encode("utf-8")) > MAX_MESSAGE_BYTES:
        raise WireError("message exceeds the size limit")
    return text


def decode(text: str) -> DswgetMessage:
    if len(text.encode("utf-8")) > MAX_MESSAGE_BYTES:
        raise WireError("message exceeds the size limit")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 3 or lines[-1] != "END":
        raise WireError("truncated message: missing END line")
    head = lines[0].split(" ")
    if len(head) < 4 or head[0] != MAGIC:
        raise WireError(f"bad header: {lines[0]!r}")
    kind, request_id, client_id = head[1], head[2], head[3]
    opts: dict[str, str] = {}
    for item in head[4:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise WireError(f"bad header field {item!r}")
        opts[key] = unquote(value)
    if "msg" not in opts:
        raise WireError("header lacks msg=<id>")
    expression = None if lines[1] == "-" else lines[1]
    pairs, results, actions, states, spawned, unreachable = [], [], [], [], [], []
    for n, line in enumerate(lines[2:-1], start=3):
        tag, _, rest = line.partition(" ")
        try:
            if tag == "P":
                term, _, state = rest.rpartition(" ")
                uri = parse_term(term)
                if not isinstance(uri, Uri):
                    raise WireError("pair term must be a URI")
                pairs.append((uri, int(state)))
            elif tag == "R":
                results.append(parse_term(rest))
            elif tag == "A":
                actions.append(_action_from_json(rest))
            elif tag == "S":
                states.append(int(rest))
            elif tag in ("D", "X"):
                mid, _, host = rest.partition(" ")
                if not mid or not host:
                    raise WireError("expected '<msgId> <host>'")
                (spawned if tag == "D" else unreachable).append((mid, host))
            else:
                raise WireError(f"unknown line tag {tag!r}")
        except (ValueError, KeyError, NTriplesError, RDFError) as exc:
            raise WireError(f"line {n}: {exc}") from None
    return DswgetMessage(
        kind=kind,
        request_id=request_id,
        client_id=client_id,
        msg_id=opts["msg"],
        expression=expression,
        pairs=tuple(pairs),
        results=tuple(results),
        actions=tuple(actions),
        engine_id=opts.get("engine"),
        done=opts.get("done"),
        result_messages=int(opts.get("results", "0")),
        states=tuple(states),
        spawned=tuple(spawned),
        unreachable=tuple(unreachable),
        error=opts.get("error"),
    )
