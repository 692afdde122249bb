from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from nautilod import expr as ast
from nautilod.automaton import (
    ActionLabel,
    AutomatonError,
    PredLabel,
    TestLabel,
    WildcardLabel,
    build_automaton,
    determinize,
    dfa_accepts,
)
from nautilod.expr import node_count, parse
from nautilod.rdf import Uri

from conftest import EXAMPLE1, EXAMPLE2
from oracles import random_expr, regex_matches

OWL_SAMEAS = Uri("http://www.w3.org/2002/07/owl#sameAs")
DBPO = "http://dbpedia.org/ontology/"
A, B = Uri("http://ex.org/p"), Uri("http://ex.org/q")


def test_example_two_hand_construction():
    # Thompson: Plus 4, Test 1, Action 2, director 2, Optional 4 -> 13 states.
    # After epsilon elimination (breadth-first numbering):
    #   0 -influenced-> 1, 1 -test-> 2, 1 -influenced-> 1,
    #   2 -sendEmail-> 3, 3 -director-> 4, 4 -sameAs-> 5; finals {4, 5}
    a = build_automaton(parse(EXAMPLE2))
    assert a.thompson_states == 13
    assert len(a.states) == 6 and a.transition_count() == 6
    assert a.finals == frozenset({4, 5})
    infl = PredLabel(Uri(DBPO + "influenced"))
    assert a.next_p(0) == [infl] and a.next_state(0, infl) == 1
    assert isinstance(a.get_test(1), TestLabel) and a.get_test(1).occurrence == 0
    assert a.next_states(1, infl) == frozenset({1})
    act = a.get_action(2)
    assert isinstance(act, ActionLabel) and act.spec.procedure == "sendEmail" and act.occurrence == 1
    assert a.next_state(2, act) == 3
    assert a.next_p(3) == [PredLabel(Uri(DBPO + "director"))]
    assert a.next_p(4) == [PredLabel(OWL_SAMEAS)]
    assert a.is_dead_end(5) and not a.is_dead_end(4)


def test_example_one_hand_construction():
    a = build_automaton(parse(EXAMPLE1))
    assert a.thompson_states == 6
    assert len(a.states) == 3 and a.finals == frozenset({2})
    assert a.next_p(0) == [PredLabel(OWL_SAMEAS), WildcardLabel()]
    assert not a.is_final(a.get_initial())


def test_initial_finality():
    assert not build_automaton(ast.Pred(A)).is_final(0)
    assert build_automaton(ast.Star(ast.Pred(A))).is_final(0)
    assert build_automaton(ast.Optional(ast.Pred(A))).is_final(0)
    assert not build_automaton(ast.Plus(ast.Pred(A))).is_final(0)


def test_bad_state_and_ambiguous_lookup():
    a = build_automaton(ast.Alt(ast.Pred(A), ast.Concat(ast.Pred(A), ast.Pred(B))))
    with pytest.raises(AutomatonError):
        a.next_state(0, PredLabel(A))  # two targets
    with pytest.raises(AutomatonError):
        a.is_final(99)


def test_inverse_label():
    a = build_automaton(ast.InversePred(A))
    assert a.next_p(0) == [PredLabel(A, inverse=True)]


def test_dot_output():
    dot = build_automaton(parse(EXAMPLE2)).to_dot()
    assert dot.startswith("digraph") and "doublecircle" in dot and "sendEmail" in dot


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_thompson_size_bound(seed):
    e = random_expr(random.Random(seed), depth=4)
    a = build_automaton(e)
    assert a.thompson_states <= 2 * node_count(e)
    assert len(a.states) <= a.thompson_states


WORDS = [w for n in range(6) for w in itertools.product([A, B], repeat=n)]


@settings(max_examples=150)
@given(st.integers(0, 2**32 - 1))
def test_nfa_dfa_and_derivatives_agree(seed):
    rng = random.Random(seed)
    e = random_expr(rng, depth=5, tests=False, actions=False)
    if any(isinstance(n, ast.InversePred) for n in ast.walk(e)):
        e = ast.Concat(ast.Pred(A), ast.Star(ast.Wildcard()))
    a = build_automaton(e)
    d = determinize(a)
    for w in WORDS:
        expected = regex_matches(e, w)
        assert a.accepts(w) == expected, w
        assert dfa_accepts(d, w) == expected, w


def test_plus_is_concat_star():
    e = ast.Plus(ast.Alt(ast.Pred(A), ast.Concat(ast.Pred(B), ast.Pred(A))))
    a1, a2 = build_automaton(e), build_automaton(ast.desugar(e))
    for w in WORDS:
        assert a1.accepts(w) == a2.accepts(w)
