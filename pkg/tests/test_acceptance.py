"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
printed in the terminal summary.  Tolerances are pinned as constants.
"""

from __future__ import annotations

import itertools
import os
import random
import re
import subprocess
import sys
import time

import pytest

from nautilod import expr as ast
from nautilod.actions import ActionContext, ActionRegistry
from nautilod.automaton import build_automaton
from nautilod.deref import HttpWeb
from nautilod.evaluator import eval_engine, eval_reference
from nautilod.expr import parse
from nautilod.network import SKIPPED, NetworkParams
from nautilod.rdf import FixtureWeb, Literal, Triple, Uri, load_fixture_web

from conftest import ACCEPTANCE_LINES, DBP, EXAMPLE1, EXAMPLE2, FB, KUBRICK_WEB, KUBRICK, LMDB, LYNCH, OWL_SAMEAS
from dswget_helpers import (
    SOLAROLO_RESULT,
    SOLAROLO_SEED,
    WaveRecorder,
    centralized_and_distributed,
    solarolo_expression,
    solarolo_network,
)
from oracles import all_expressions, random_expr, random_web, regex_matches
from stubserver import StubServer

C1_MAX_SECONDS = 1.0
C3_INSTANCES = 500
C3_MAX_SECONDS = 60.0
C4_MAX_DEPTH = 3
C4_MAX_WORD = 4
C7_RANDOM_WEBS = 100

# the seven expected results of the sameAs-closure query
EXAMPLE1_LISTED = {
    Uri(DBP + "David_Lynch"), Uri(DBP + "New_York"), Uri(DBP + "Film_Editing"),
    Uri(LMDB + "Producer"), Uri(LMDB + "film/334"), Uri(FB + "Path_of_Glory"),
    Uri("http://en.wikipedia.org/wiki/Stanley_Kubrick"),
}


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] C{n} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def swget_subprocess(args, proxy, tmp_path):
    env = {k: v for k, v in os.environ.items() if k.lower() not in ("http_proxy", "https_proxy", "no_proxy", "all_proxy")}
    env.update(http_proxy=proxy, SWGET_OUT=str(tmp_path))
    proc = subprocess.run([sys.executable, "-m", "nautilod.cli", *args], capture_output=True, text=True,
                          env=env, timeout=120)
    metrics = dict(m.groups() for m in re.finditer(r"^([\w.]+)=(.*)$", proc.stderr, re.M))
    return proc.returncode, proc.stdout.splitlines(), metrics


def test_c1_example_one_exact():
    web = load_fixture_web(KUBRICK_WEB)
    t0 = time.perf_counter()
    result, _ = eval_engine(parse(EXAMPLE1), KUBRICK, web)
    elapsed = time.perf_counter() - t0
    exact = result.terms == EXAMPLE1_LISTED
    extra = sorted(t.value for t in result.terms - EXAMPLE1_LISTED)
    missing = sorted(t.value for t in EXAMPLE1_LISTED - result.terms)
    report(1, exact and elapsed < C1_MAX_SECONDS,
           f"sameAs closure exact 7 results: got {len(result.terms)}, extra={extra}, missing={missing}, "
           f"runtime {elapsed:.3f}s (< {C1_MAX_SECONDS}s)")
    assert elapsed < C1_MAX_SECONDS
    # the sameAs triple that lets the star reach freebase also feeds the
    # wildcard step, so the sameAs targets themselves are results too
    assert result.terms == EXAMPLE1_LISTED


def test_c2_example_two_exact(tmp_path):
    web = load_fixture_web(KUBRICK_WEB)
    ctx = ActionContext(outbox=tmp_path / "outbox.txt", web=web)
    result, _ = eval_engine(parse(EXAMPLE2), KUBRICK, web, None, ActionRegistry.with_builtins(), ctx)
    expected = {Uri(DBP + "Blue_Velvet_(film)"), Uri(FB + "Blue_Velvet")}
    targets = [a.target for a in result.actions]
    outbox = (tmp_path / "outbox.txt").read_text().splitlines()
    ok = result.terms == expected and targets == [LYNCH] and len(outbox) == 1
    report(2, ok, f"influence-email query results={sorted(t.value for t in result.terms)} actions={[t.value for t in targets]} "
                  f"outbox entries={len(outbox)}")
    assert ok


def test_c3_engine_matches_reference():
    t0 = time.perf_counter()
    agree = with_tests = 0
    failures = []
    for i in range(C3_INSTANCES):
        rng = random.Random(i)
        web, uris = random_web(rng, max_uris=30, max_triples=8)
        e = random_expr(rng, depth=3)
        assert ast.depth(e) <= 3
        with_tests += any(isinstance(n, ast.Test) for n in ast.walk(e))
        seed = rng.choice(uris)
        reg = ActionRegistry.with_builtins()
        r1, _ = eval_engine(e, seed, web, None, reg, ActionContext(web=web))
        r2 = eval_reference(e, seed, web, reg, ActionContext(web=web))
        acts1 = {(a.procedure, a.occurrence, a.target) for a in r1.actions}
        acts2 = {(a.procedure, a.occurrence, a.target) for a in r2.actions}
        if r1.terms == r2.terms and acts1 == acts2:
            agree += 1
        else:
            failures.append(i)
    elapsed = time.perf_counter() - t0
    ok = agree == C3_INSTANCES and elapsed < C3_MAX_SECONDS
    report(3, ok, f"oracle equivalence {agree}/{C3_INSTANCES} ({with_tests} with tests), "
                  f"{elapsed:.1f}s (< {C3_MAX_SECONDS:.0f}s), failing seeds={failures[:5]}")
    assert ok


def test_c4_regular_language_equivalence():
    a, b = Uri("http://ex.org/a"), Uri("http://ex.org/b")
    exprs = all_expressions([ast.Pred(a), ast.Pred(b), ast.Wildcard()], C4_MAX_DEPTH)
    words = [w for n in range(C4_MAX_WORD + 1) for w in itertools.product([a, b], repeat=n)]
    failures = 0
    for e in exprs:
        nfa = build_automaton(e)
        for w in words:
            failures += nfa.accepts(w) != regex_matches(e, w)
    report(4, failures == 0, f"{len(exprs)} expressions x {len(words)} words, {failures} mismatches")
    assert failures == 0


@pytest.mark.parametrize("n", [2, 5])
def test_c5_cycle_termination(n):
    uris = [Uri(f"http://cycle{n}.example/u{i}") for i in range(n)]
    web = FixtureWeb.from_triples({u: [Triple(u, OWL_SAMEAS, uris[(i + 1) % n])] for i, u in enumerate(uris)})
    e = ast.Star(ast.Pred(OWL_SAMEAS))
    result, m = eval_engine(e, uris[0], web)
    # the same cycle over HTTP: count GETs per URI at the server
    with StubServer(web) as stub:
        http_result, _ = eval_engine(e, uris[0], HttpWeb(proxy=stub.proxy))
        gets = stub.log.urls()
    ok = (result.terms == set(uris) and m.uris_dereferenced == n and m.fetches == n
          and http_result.terms == set(uris) and sorted(gets) == sorted(u.value for u in uris))
    report(5, ok, f"{n}-cycle: results={len(result.terms)}/{n}, dereferenced={m.uris_dereferenced}, "
                  f"HTTP GETs={len(gets)} (each URI once: {len(set(gets)) == len(gets)})")
    assert ok


def _two_host_web():
    a = [Uri(f"http://allowed.example/a{i}") for i in range(3)]
    x = [Uri(f"http://excluded.example/x{i}") for i in range(3)]
    links = {a[0]: [a[1], x[0]], a[1]: [a[2], x[1]], x[0]: [x[2], a[2]], a[2]: [], x[1]: [], x[2]: []}
    return FixtureWeb.from_triples({s: [Triple(s, OWL_SAMEAS, o) for o in os_] for s, os_ in links.items()}), a, x


def test_c6a_domains_never_contacts_excluded_host(tmp_path):
    web, a, x = _two_host_web()
    with StubServer(web) as stub:
        code, out, _ = swget_subprocess([a[0].n3(), "(<owl:sameAs>)*", "-domains", "{allowed.example}"], stub.proxy, tmp_path)
        restricted = stub.log.hosts()
    with StubServer(web) as stub:
        swget_subprocess([a[0].n3(), "(<owl:sameAs>)*"], stub.proxy, tmp_path)
        unrestricted = stub.log.hosts()
    ok = code == 0 and restricted == {"allowed.example"} and "excluded.example" in unrestricted
    report(6, ok, f"(a) -domains: hosts contacted={sorted(restricted)} (control run: {sorted(unrestricted)}), "
                  f"exit {code}, results={len(out)}")
    assert ok


def test_c6b_max_der_triples_skips_large_descriptions(tmp_path):
    limit = 3
    seed = Uri("http://size.example/seed")
    sizes = {"d2": 2, "d4": 4, "d8": 8}
    others = [Uri(f"http://size.example/{name}") for name in sizes]
    # the seed links to every other description directly (3 triples, under the limit)
    triples = {seed: [Triple(seed, OWL_SAMEAS, u) for u in others]}
    for u, n in zip(others, sizes.values()):
        triples[u] = [Triple(u, Uri("http://ex.org/v"), Literal(str(k))) for k in range(n)]
    web = FixtureWeb.from_triples(triples)
    big = {u for u in web.descriptions if len(web.descriptions[u]) > limit}
    with StubServer(web) as stub:
        _, m = eval_engine(parse("(<owl:sameAs>)*"), seed, HttpWeb(proxy=stub.proxy), NetworkParams(max_der_triples=limit))
    skipped = {r.uri for r in m.fetch_log if r.status == SKIPPED and r.reason == "maxDerTriples"}
    kept = {r.uri for r in m.fetch_log if r.status == "ok"}
    with StubServer(web) as stub:
        code, _, metrics = swget_subprocess([seed.n3(), "(<owl:sameAs>)*", "-maxDerTriples", str(limit)], stub.proxy, tmp_path)
    ok = (skipped == big and kept == set(web.descriptions) - big
          and code == 3 and metrics.get("skipped") == str(len(big)) and metrics.get("stopReason") == "maxDerTriples")
    report(6, ok, f"(b) -maxDerTriples {limit}: skippedByPolicy={sorted(u.value.rsplit('/', 1)[1] for u in skipped)} "
                  f"kept={sorted(u.value.rsplit('/', 1)[1] for u in kept)} (sizes {sizes}), "
                  f"CLI exit {code} skipped={metrics.get('skipped')}")
    assert ok


def _bulk_web(n=10, per=5000):
    uris = [Uri(f"http://bulk.example/b{i}") for i in range(n)]
    return FixtureWeb.from_triples({
        u: [Triple(u, Uri("http://ex.org/v"), Literal(f"value number {k} of {u.value}")) for k in range(per)]
        + ([Triple(u, OWL_SAMEAS, uris[i + 1])] if i + 1 < n else [])
        for i, u in enumerate(uris)
    }), uris


def test_c6c_global_limits_exit_partial(tmp_path):
    web, uris = _bulk_web()
    with StubServer(web) as stub:
        size_code, _, size_metrics = swget_subprocess([uris[0].n3(), "(<owl:sameAs>)*", "-maxSize", "1"], stub.proxy, tmp_path)
        size_gets = len(stub.log.urls())
    with StubServer(web, delay=0.25) as stub:
        time_code, _, time_metrics = swget_subprocess([uris[0].n3(), "(<owl:sameAs>)*", "-timeout", "600"], stub.proxy, tmp_path)
        time_gets = len(stub.log.urls())
    ok = (size_code == 3 and size_metrics.get("partial") == "true" and size_metrics.get("stopReason") == "maxSize"
          and size_gets < len(uris) and int(size_metrics["bytes"]) > 1024 * 1024
          and time_code == 3 and time_metrics.get("partial") == "true" and time_metrics.get("stopReason") == "timeout"
          and time_gets < len(uris))
    report(6, ok, f"(c) -maxSize 1: exit {size_code}, GETs {size_gets}/{len(uris)}, bytes {size_metrics.get('bytes')}; "
                  f"-timeout 600: exit {time_code}, GETs {time_gets}/{len(uris)}")
    assert ok


def test_c7_distributed_equivalence():
    net = solarolo_network()
    result = net.client_submit(solarolo_expression(), SOLAROLO_SEED)
    scenario_ok = result.uris == SOLAROLO_RESULT and not result.literals and not result.partial
    agree = 0
    for seed in range(C7_RANDOM_WEBS):
        central, dist, _, _ = centralized_and_distributed(seed)
        same_actions = {(a.occurrence, a.target) for a in central.actions} == {(a.occurrence, a.target) for a in dist.actions}
        agree += dist.terms == central.terms and same_actions and not dist.partial
    ok = scenario_ok and agree == C7_RANDOM_WEBS
    report(7, ok, f"4-engine scenario results={sorted(u.value for u in result.uris)}; "
                  f"random 3-engine webs {agree}/{C7_RANDOM_WEBS}")
    assert ok


def test_c8_batching_and_loop_safety():
    net = solarolo_network()
    recorder = WaveRecorder(net)
    net.client_submit(solarolo_expression(), SOLAROLO_SEED)
    max_processed = max(net.processed_counts().values())
    max_per_host = max((c for w in recorder.waves for c in w.values()), default=0)
    sizes = list(recorder.sizes)
    for seed in range(C7_RANDOM_WEBS):
        _, _, rnet, rec = centralized_and_distributed(seed)
        max_processed = max([max_processed, *rnet.processed_counts().values()])
        max_per_host = max([max_per_host, *(c for w in rec.waves for c in w.values())])
        sizes += rec.sizes
    multi = sum(1 for s in sizes if s > 1)
    ok = max_processed == 1 and max_per_host == 1 and multi > 0
    report(8, ok, f"max times a pair was processed={max_processed}, max Delegates per host per wave={max_per_host}, "
                  f"multi-pair Delegates={multi}/{len(sizes)}")
    assert ok


def test_c9_metrics_sanity(tmp_path):
    web = load_fixture_web(KUBRICK_WEB)
    ctx = ActionContext(outbox=tmp_path / "outbox.txt", web=web)
    _, m = eval_engine(parse(EXAMPLE2), KUBRICK, web, None, ActionRegistry.with_builtins(), ctx)
    # reached descriptions: Kubrick, Lynch, Tarantino (influenced), Blue Velvet on dbpedia and freebase
    hand_count = 5
    parts = m.time_navigation + m.time_tests + m.time_actions
    ok = m.time_tests > 0 and m.time_actions > 0 and m.uris_dereferenced == hand_count and parts <= m.elapsed
    report(9, ok, f"timeTests={m.time_tests:.6f} timeActions={m.time_actions:.6f} "
                  f"urisDereferenced={m.uris_dereferenced} (hand count {hand_count}), "
                  f"nav+tests+actions={parts:.6f} <= elapsed={m.elapsed:.6f}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
