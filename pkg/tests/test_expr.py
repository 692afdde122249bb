from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from nautilod import expr as ast
from nautilod.expr import (
    DEFAULT_PREFIXES,
    ExprSyntaxError,
    UnknownPrefix,
    action_names,
    depth,
    desugar,
    load_prefix_file,
    node_count,
    occurrence_ids,
    parse,
    pretty_print,
)
from nautilod.rdf import Uri

from conftest import EXAMPLE1, EXAMPLE2
from oracles import random_expr

OWL = "http://www.w3.org/2002/07/owl#"
DBPO = "http://dbpedia.org/ontology/"
SAMEAS = ast.Pred(Uri(OWL + "sameAs"))


def test_example_one_shape():
    assert parse(EXAMPLE1) == ast.Concat(ast.Star(SAMEAS), ast.Wildcard())


def test_example_two_shape():
    e = parse(EXAMPLE2)
    # ((Test(Plus) / Action) / director) / Optional(sameAs)
    assert isinstance(e, ast.Concat) and e.right == ast.Optional(SAMEAS)
    left = e.left
    assert left.right == ast.Pred(Uri(DBPO + "director"))
    test, action = left.left.left, left.left.right
    assert isinstance(test, ast.Test) and test.inner == ast.Plus(ast.Pred(Uri(DBPO + "influenced")))
    assert isinstance(action, ast.Action) and action.spec.procedure == "sendEmail"
    assert action.spec.args == ("p",)
    assert action_names(e) == {"sendEmail"}


def test_precedence_and_associativity():
    a, b, c = (ast.Pred(Uri(f"http://ex.org/{x}")) for x in "abc")
    assert parse("<http://ex.org/a>/<http://ex.org/b>|<http://ex.org/c>") == ast.Alt(ast.Concat(a, b), c)
    assert parse("<http://ex.org/a>|<http://ex.org/b>|<http://ex.org/c>") == ast.Alt(ast.Alt(a, b), c)
    assert parse("<http://ex.org/a>/<http://ex.org/b>*") == ast.Concat(a, ast.Star(b))


def test_inverse_forms():
    inv = ast.InversePred(Uri(OWL + "sameAs"))
    assert parse("^<owl:sameAs>") == inv
    assert parse("^owl:sameAs") == inv
    assert parse("<owl:sameAs>^-1") == inv


def test_curies_and_braced_actions():
    assert parse("owl:sameAs") == SAMEAS
    e = parse("{noop[SELECT ?x WHERE {?x ?p ?o}]}")
    assert isinstance(e, ast.Action) and e.spec.procedure == "noop"


@pytest.mark.parametrize("text", [
    "",
    "<owl:sameAs>/",
    "(<owl:sameAs>",
    "()",
    "^<_>",
    "[ASK {?s ?p ?o}]",
    "<owl:sameAs>[SELECT ?s WHERE {?s ?p ?o}]",
    "act[ASK {?s ?p ?o}]",
    "act",
    "act(?z)[SELECT ?s WHERE {?s ?p ?o}]",
    "(<owl:sameAs>/<owl:sameAs>)^-1",
    "<owl:sameAs>[ASK {?s ?p ?o]",
    "<owl:sameAs>[ASK {?s ?p ?o} [x]]",
])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_unknown_prefix():
    with pytest.raises(UnknownPrefix):
        parse("<nope:x>")


def test_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("<owl:sameAs> )")
    assert info.value.position == 13


def test_prefix_file(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("# c\nex http://ex.org/\n@prefix ys: <http://ys.org/> .\n")
    prefixes = {**DEFAULT_PREFIXES, **load_prefix_file(f)}
    assert parse("ex:a/ys:b", prefixes) == ast.Concat(ast.Pred(Uri("http://ex.org/a")), ast.Pred(Uri("http://ys.org/b")))


def test_helpers():
    e = parse(EXAMPLE2)
    assert depth(parse("<owl:sameAs>")) == 1
    assert depth(parse(EXAMPLE1)) == 3
    assert node_count(parse(EXAMPLE1)) == 4
    assert sorted(occurrence_ids(e).values()) == [0, 1]
    assert not any(isinstance(n, ast.Plus) for n in ast.walk(desugar(e)))


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_print_parse_round_trip(seed):
    e = random_expr(random.Random(seed), depth=4)
    assert parse(pretty_print(e), {}) == e


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_printing_is_a_fixpoint(seed):
    text = pretty_print(random_expr(random.Random(seed), depth=4))
    assert pretty_print(parse(text, {})) == text
