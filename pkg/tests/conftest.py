from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nautilod.rdf import Uri, load_fixture_web  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "nautilod" / "fixtures"
KUBRICK_WEB = FIXTURES / "kubrick" / "manifest.tsv"
SOLAROLO = FIXTURES / "solarolo"
ROME = FIXTURES / "rome" / "manifest.tsv"

DBP = "http://dbpedia.org/resource/"
FB = "http://rdf.freebase.com/ns/"
LMDB = "http://data.linkedmdb.org/resource/"
OWL_SAMEAS = Uri("http://www.w3.org/2002/07/owl#sameAs")

EXAMPLE1 = "(<owl:sameAs>)*/<_>"
EXAMPLE2 = (
    "(<dbpo:influenced>)+[ASK ?p <dbpo:birthDate> ?y. FILTER(?y<1961-01-01)]"
    "/{sendEmail(?p)[SELECT ?p WHERE {?x <foaf:page> ?p.}]}"
    "/<dbpo:director>/(<owl:sameAs>)?"
)
KUBRICK = Uri(DBP + "Stanley_Kubrick")
LYNCH = Uri(DBP + "David_Lynch")


@pytest.fixture
def kubrick():
    return load_fixture_web(KUBRICK_WEB)


# acceptance lines are collected by test_acceptance.py and repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
