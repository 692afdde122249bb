from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from nautilod.ntriples import (
    BlankNodeError,
    NTriplesError,
    parse_ntriples,
    parse_term,
    serialize_ntriples,
)
from nautilod.rdf import (
    Description,
    FixtureWeb,
    Literal,
    RDFError,
    Triple,
    Uri,
    load_fixture_web,
    parse_manifest,
    term_sort_key,
)

from conftest import KUBRICK_WEB, KUBRICK

XSD = "http://www.w3.org/2001/XMLSchema#"
S, P, Q = Uri("http://ex.org/s"), Uri("http://ex.org/p"), Uri("http://ex.org/q")


def test_uri_scheme_and_host_are_case_folded():
    assert Uri("HTTP://DBpedia.ORG/Resource/X").value == "http://dbpedia.org/Resource/X"
    assert Uri("http://ex.org/a").host == "ex.org"


@pytest.mark.parametrize("bad", ["", "relative/path", "http://ex.org/a b", "http://ex.org/<x>"])
def test_bad_uris_rejected(bad):
    with pytest.raises(RDFError):
        Uri(bad)


def test_literal_cannot_have_datatype_and_language():
    with pytest.raises(RDFError):
        Literal("x", datatype=Uri(XSD + "string"), language="en")
    assert Literal("x", language="EN").language == "en"


def test_sort_key_puts_uris_first():
    terms = [Literal("a"), Uri("http://b.org/"), Uri("http://a.org/")]
    assert sorted(terms, key=term_sort_key) == [Uri("http://a.org/"), Uri("http://b.org/"), Literal("a")]


def test_triple_checks_positions():
    with pytest.raises(RDFError):
        Triple(Literal("x"), P, S)  # type: ignore[arg-type]


def test_description_match():
    d = Description(S, [Triple(S, P, Q), Triple(Q, P, S), Triple(S, Q, Literal("1"))])
    assert {t.object for t in d.match(subject=S)} == {Q, Literal("1")}
    assert {t.subject for t in d.match(predicate=P, obj=S)} == {Q}
    assert len(d) == 3 and bool(d) and not Description(S)


def test_fixture_web_unknown_uri_is_empty():
    web = FixtureWeb.from_triples({S: [Triple(S, P, Q)]})
    assert len(web.resolve(S)) == 1
    assert len(web.resolve(Q)) == 0


def test_kubrick_fixture_loads():
    web = load_fixture_web(KUBRICK_WEB)
    assert len(web.descriptions) == 7
    assert KUBRICK in web.descriptions


def test_manifest_errors(tmp_path):
    m = tmp_path / "m.tsv"
    m.write_text("http://ex.org/a\ta.nt\nhttp://ex.org/a\tb.nt\n")
    with pytest.raises(RDFError, match="duplicate"):
        parse_manifest(m)
    m.write_text("only-one-field\n")
    with pytest.raises(RDFError):
        parse_manifest(m)
    m.write_text("http://ex.org/a\tmissing.nt\n")
    with pytest.raises(RDFError, match="not found"):
        load_fixture_web(m)
    with pytest.raises(RDFError, match="not found"):
        load_fixture_web(tmp_path / "nope.tsv")


# --- N-Triples


def test_parse_ntriples_forms():
    text = (
        "# comment\n"
        "<http://ex.org/s> <http://ex.org/p> <http://ex.org/o> .\n"
        '<http://ex.org/s> <http://ex.org/p> "caf\\u00e9"@fr .\n'
        '<http://ex.org/s> <http://ex.org/p> "7"^^<http://www.w3.org/2001/XMLSchema#integer> .\n'
        '<http://ex.org/s> <http://ex.org/p> "a \\"q\\"\\n" .\n'
        "\n"
    )
    ts = parse_ntriples(text)
    objs = {t.object for t in ts}
    assert Literal("café", language="fr") in objs
    assert Literal("7", datatype=Uri(XSD + "integer")) in objs
    assert Literal('a "q"\n') in objs
    assert len(ts) == 4


@pytest.mark.parametrize("line", [
    "<http://ex.org/s> <http://ex.org/p> <http://ex.org/o>",
    '"lit" <http://ex.org/p> <http://ex.org/o> .',
    "<http://ex.org/s> <http://ex.org/p> .",
    "<http://ex.org/s> <http://ex.org/p> <http://ex.org/o> . junk",
])
def test_parse_ntriples_errors(line):
    with pytest.raises(NTriplesError):
        parse_ntriples(line)


def test_blank_nodes():
    text = "_:b <http://ex.org/p> <http://ex.org/o> .\n<http://ex.org/s> <http://ex.org/p> _:b .\n"
    with pytest.raises(BlankNodeError):
        parse_ntriples(text)
    assert parse_ntriples(text, skip_blank_nodes=True) == set()


def test_error_reports_line():
    with pytest.raises(NTriplesError) as info:
        parse_ntriples("<http://ex.org/s> <http://ex.org/p> <http://ex.org/o> .\nbad\n", source="f.nt")
    assert info.value.line == 2


iris = st.builds(lambda a, b: Uri(f"http://{a}.example/{b}"),
                 st.from_regex(r"[a-z]{1,6}", fullmatch=True),
                 st.from_regex(r"[A-Za-z0-9_()%\-]{0,10}", fullmatch=True))
texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=20)
literals = st.one_of(
    st.builds(Literal, texts),
    st.builds(lambda t, l: Literal(t, language=l), texts, st.from_regex(r"[a-z]{2}(-[a-z0-9]{2,4})?", fullmatch=True)),
    st.builds(lambda t, d: Literal(t, datatype=d), texts, iris),
)
triples = st.builds(Triple, iris, iris, st.one_of(iris, literals))


@given(st.sets(triples, max_size=12))
def test_ntriples_round_trip(ts):
    assert parse_ntriples(serialize_ntriples(ts)) == ts


@given(st.one_of(iris, literals))
def test_term_round_trip(t):
    assert parse_term(t.n3()) == t


@given(st.lists(triples, max_size=8))
def test_serialization_is_order_independent(ts):
    assert serialize_ntriples(ts) == serialize_ntriples(list(reversed(ts)))
