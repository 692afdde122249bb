"""``swget``: run a NautiLOD expression from a seed URI.

    swget <seed> <expression | @file> [flags]

Exit status: 0 complete, 3 partial (a limit fired or an engine was
unreachable), 1 usage or input error, 2 expression or query syntax error.
Results go to stdout (or ``-o``), one N-Triples term per line; a
``key=value`` metrics block goes to stderr.

Action sinks are created in ``$SWGET_OUT`` (default: the current
directory): ``outbox.txt`` for outboxNotify/sendEmail, ``saved.nt`` for
save, and ``graph/`` for ``-saveGraph``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import TextIO

from .actions import ActionContext, ActionError, ActionRegistry
from .automaton import build_automaton
from .evaluator import NavResult, eval_engine
from .expr import DEFAULT_PREFIXES, ExprSyntaxError, action_names, load_prefix_file, parse
from .network import NetworkParams
from .query import QueryError, expand_iri
from .rdf import RDFError, Uri, load_fixture_web

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)

    def _get_option_tuples(self, option_string: str):
        # allow_abbrev=False does not stop prefix matching of single-dash
        # long flags on older Pythons; only exact flag names are accepted
        return []


def _domains(text: str) -> tuple[str, ...]:
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1]
    hosts = tuple(h.strip() for h in body.split(",") if h.strip())
    if not hosts:
        raise argparse.ArgumentTypeError("expected {host1,host2,...}")
    return hosts


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="swget",
        description="Navigate the Web of Data with a NautiLOD expression.",
        allow_abbrev=False,
    )
    p.add_argument("seed", help="seed URI: <http://...>, <prefix:local> or prefix:local")
    p.add_argument("expression", help="NautiLOD expression, or @file to read it from a file")
    p.add_argument("-maxDerTriples", type=_nonneg, metavar="N",
                   help="discard descriptions with more than N triples")
    p.add_argument("-saveGraph", action="store_true", help="store every description retrieved")
    p.add_argument("-maxSize", type=_nonneg, metavar="MB", help="stop after MB megabytes")
    p.add_argument("-timeoutDer", type=_nonneg, metavar="MS", help="per-dereference time limit")
    p.add_argument("-timeout", type=_nonneg, metavar="MS", help="whole-run time limit")
    p.add_argument("-domains", type=_domains, metavar="{h1,h2}", help="hosts that may be dereferenced")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("-fixture", metavar="MANIFEST", help="navigate a local fixture web")
    mode.add_argument("-dswget", metavar="CONFIG", help="run distributed over the configured engines")
    p.add_argument("-prefixes", metavar="FILE", help="extra 'prefix IRI' lines")
    p.add_argument("-o", dest="output", metavar="FILE", help="write results here instead of stdout")
    p.add_argument("-dot", metavar="FILE", help="write the automaton in DOT format")
    return p


def _read_expression(arg: str) -> str:
    if arg.startswith("@"):
        try:
            return Path(arg[1:]).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise UsageError(f"cannot read expression file: {exc}") from None
    return arg


def _seed(text: str, prefixes: dict[str, str]) -> Uri:
    text = text.strip()
    if text.startswith("<") and text.endswith(">"):
        return expand_iri(text, prefixes)
    if "://" in text:
        return Uri(text)
    return expand_iri(text, prefixes)


def _emit_metrics(err: TextIO, pairs: dict[str, str]) -> None:
    for k, v in pairs.items():
        err.write(f"{k}={v}\n")


def run(argv: list[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        err.write(parser.format_usage())
        err.write(f"swget: error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    prefixes = dict(DEFAULT_PREFIXES)
    try:
        if args.prefixes:
            prefixes.update(load_prefix_file(args.prefixes))
        text = _read_expression(args.expression)
    except (OSError, ValueError, UsageError) as exc:
        err.write(f"swget: error: {exc}\n")
        return EXIT_USAGE

    try:
        e = parse(text, prefixes)
        seed = _seed(args.seed, prefixes)
    except (ExprSyntaxError, QueryError) as exc:
        err.write(f"swget: syntax error: {exc}\n")
        return EXIT_PARSE
    except RDFError as exc:
        err.write(f"swget: bad seed: {exc}\n")
        return EXIT_USAGE

    registry = ActionRegistry.with_builtins()
    try:
        registry.check(action_names(e))
    except ActionError as exc:
        err.write(f"swget: {exc}\n")
        return EXIT_PARSE

    params = NetworkParams(
        max_der_triples=args.maxDerTriples,
        save_graph=args.saveGraph,
        max_size=args.maxSize,
        timeout_der=args.timeoutDer,
        timeout=args.timeout,
        domains=args.domains,
    )
    sink = Path(os.environ.get("SWGET_OUT", "."))
    if args.dot:
        Path(args.dot).write_text(build_automaton(e).to_dot(), encoding="utf-8")

    metrics: dict[str, str] = {}
    try:
        if args.dswget:
            result, metrics = _run_distributed(args.dswget, e, seed, registry, sink, params)
        else:
            if args.fixture:
                web = load_fixture_web(args.fixture)
                mode = "fixture"
            else:
                from .deref import HttpWeb

                web = HttpWeb()
                mode = "live"
            context = ActionContext(
                outbox=sink / "outbox.txt", save_path=sink / "saved.nt",
                graph_dir=sink / "graph", params=params, web=web,
            )
            result, m = eval_engine(e, seed, web, params, registry, context)
            metrics = {"mode": mode, **m.as_dict()}
    except (RDFError, OSError, ValueError) as exc:
        err.write(f"swget: error: {exc}\n")
        return EXIT_USAGE

    _write_results(result, args.output, out)
    summary = {
        **metrics,
        "results": str(len(result.terms)),
        "actions": str(len(result.actions)),
        "partial": "true" if result.partial else "false",
        "stopReason": result.stop_reason or "-",
        **{f"param.{k}": v for k, v in params.as_flags().items()},
    }
    _emit_metrics(err, summary)
    return EXIT_PARTIAL if result.partial else EXIT_OK


def _write_results(result: NavResult, output: str | None, out: TextIO) -> None:
    lines = "".join(t.n3() + "\n" for t in result.sorted_terms())
    if output:
        Path(output).write_text(lines, encoding="utf-8")
    else:
        out.write(lines)


def _run_distributed(config, e, seed, registry, sink: Path, params: NetworkParams):
    from .dswget import LocalNetwork, load_config, load_stores
    from .dswget.tcp import run_submit

    configs = load_config(config)
    timeout_s = params.timeout / 1000.0 if params.timeout is not None else 30.0
    if all(c.address is not None for c in configs):
        result, tracker = run_submit(config, seed, e, timeout=timeout_s)
        return result, {"mode": "dswget-tcp", "engines": str(len(tracker.engines))}
    context = ActionContext(outbox=sink / "outbox.txt", save_path=sink / "saved.nt",
                            graph_dir=sink / "graph", params=params)
    net = LocalNetwork(load_stores(configs), actions=registry, context=context)
    result = net.client_submit(e, seed)
    return result, {
        "mode": "dswget-local",
        "engines": str(len(net.engines)),
        "delegates": str(net.stats.delegates),
        "messages": str(net.stats.messages),
    }


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
