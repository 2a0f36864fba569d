import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopduality import data_path
from coopduality.markovgraph import (
    Factor,
    FactorGraphSpec,
    Fdg,
    GraphError,
    MarkovQuery,
    block_factorization,
    block_fdg,
    block_query,
    d_separation_check,
    factorization_from_fdg,
    fdg_from_factorization,
    instantiate_factors,
    instantiate_fdg,
    soundness_crosscheck,
    undirected_markov_check,
)
from coopduality.specfile import graph_from_doc, read_spec


def test_undirected_chain_and_clique():
    chain = FactorGraphSpec("ABC", [{"A", "B"}, {"B", "C"}])
    assert undirected_markov_check(chain, MarkovQuery("A", "C", "B"))
    clique = FactorGraphSpec("ABC", [{"A", "B", "C"}])
    assert not undirected_markov_check(clique, MarkovQuery("A", "B", "C"))


def test_d_separation_chain_and_collider():
    chain = Fdg("ABC", [("A", "B"), ("B", "C")])
    assert d_separation_check(chain, MarkovQuery("A", "C", "B"))
    collider = Fdg("ABC", [("A", "B"), ("C", "B")])
    assert not d_separation_check(collider, MarkovQuery("A", "C", "B"))
    assert d_separation_check(collider, MarkovQuery("A", "C"))


def test_collider_fixture():
    bundle = graph_from_doc(read_spec(data_path("collider.fdg")))
    assert bundle.query == MarkovQuery("A", "B", "C")
    assert not d_separation_check(bundle.fdg, bundle.query)


def test_block_graph_shape():
    g = block_fdg()
    assert len(g.nodes) == 11
    assert g.parents("Xq") == {"M1", "M2"}
    assert g.parents("Y2q") == {"Xq"} and g.parents("Y1fut") == {"Xfut"}
    assert len(g.edges) == 12


def test_block_query_both_methods():
    assert d_separation_check(block_fdg(), block_query())
    assert undirected_markov_check(block_factorization(), block_query())


def test_block_fixture_matches_builder():
    bundle = graph_from_doc(read_spec(data_path("block.fdg")))
    assert bundle.fdg.edges == block_fdg().edges
    assert bundle.query == block_query()


def test_block_query_numeric():
    g, q = block_fdg(), block_query()
    rep = soundness_crosscheck(q, True, lambda r: instantiate_fdg(g, r), count=20, seed=3)
    assert rep.sound and rep.max_cmi < 1e-9


def test_fdg_from_factorization_examples():
    g = fdg_from_factorization(FactorGraphSpec("XY", [Factor({"X", "Y"}, {"Y"})]))
    assert g.edges == {("X", "Y")}
    g = fdg_from_factorization(FactorGraphSpec("XY", [Factor({"X"}, {"X"}), Factor({"Y"}, {"Y"})]))
    assert g.edges == frozenset()
    assert fdg_from_factorization(block_factorization()).edges == block_fdg().edges


def test_chain_crosscheck_has_no_violations():
    chain = Fdg("ABCD", [("A", "B"), ("B", "C"), ("C", "D")])
    q = MarkovQuery("A", "D", {"B"})
    assert d_separation_check(chain, q)
    rep = soundness_crosscheck(q, True, lambda r: instantiate_fdg(chain, r, 3), count=50)
    assert rep.sound


def test_false_verdict_tests_nothing():
    clique = FactorGraphSpec("ABC", [{"A", "B", "C"}])
    q = MarkovQuery("A", "B", "C")
    rep = soundness_crosscheck(q, undirected_markov_check(clique, q), lambda r: instantiate_factors(clique, r))
    assert rep.instantiations == 0 and rep.sound


def test_graph_errors():
    with pytest.raises(GraphError):
        Fdg("AB", [("A", "B"), ("B", "A")])
    with pytest.raises(GraphError):
        Fdg("A", [("A", "Q")])
    with pytest.raises(GraphError):
        MarkovQuery("A", "A")
    with pytest.raises(GraphError):
        d_separation_check(Fdg("AB", []), MarkovQuery("A", "Z"))


@st.composite
def dags(draw):
    n = draw(st.integers(3, 6))
    names = [f"N{i}" for i in range(n)]
    edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n) if draw(st.booleans())]
    order = draw(st.permutations(names))
    a, b = order[0], order[1]
    c = set(order[2:2 + draw(st.integers(0, n - 2))])
    return Fdg(names, edges), MarkovQuery(a, b, c)


@given(dags(), st.integers(0, 2**16))
def test_d_separation_is_sound(case, seed):
    g, q = case
    if d_separation_check(g, q):
        rep = soundness_crosscheck(q, True, lambda r: instantiate_fdg(g, r), count=3, seed=seed)
        assert rep.sound


@given(dags())
def test_factorization_round_trip(case):
    g, _ = case
    assert fdg_from_factorization(factorization_from_fdg(g)).edges == g.edges


@given(dags())
def test_moral_graph_check_never_beats_d_separation(case):
    """The undirected test on the node-factor graph is at most as permissive as d-separation."""
    g, q = case
    if undirected_markov_check(factorization_from_fdg(g), q):
        assert d_separation_check(g, q)
