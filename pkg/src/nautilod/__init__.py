"""NautiLOD: declarative navigation of the Web of Data.

The main entry points are :func:`~nautilod.expr.parse` for expressions,
:func:`~nautilod.evaluator.eval_engine` for running them, and the ``swget``
command line tool.
"""

from .actions import ActionContext, ActionRecord, ActionRegistry
from .automaton import NavAutomaton, build_automaton
from .evaluator import LookupPair, NavResult, RunMetrics, eval_engine, eval_reference, navigate
from .expr import parse, pretty_print
from .network import NetworkParams, check_net
from .ntriples import parse_ntriples, serialize_ntriples
from .query import eval_ask, eval_select, parse_query
from .rdf import Description, FixtureWeb, Literal, Triple, Uri, WebInstance, load_fixture_web, resolve

__version__ = "0.1.0"

__all__ = [
    "ActionContext",
    "ActionRecord",
    "ActionRegistry",
    "Description",
    "FixtureWeb",
    "Literal",
    "LookupPair",
    "NavAutomaton",
    "NavResult",
    "NetworkParams",
    "RunMetrics",
    "Triple",
    "Uri",
    "WebInstance",
    "build_automaton",
    "check_net",
    "eval_ask",
    "eval_engine",
    "eval_reference",
    "eval_select",
    "load_fixture_web",
    "navigate",
    "parse",
    "parse_ntriples",
    "parse_query",
    "pretty_print",
    "resolve",
    "serialize_ntriples",
]
