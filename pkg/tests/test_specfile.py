import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopduality import data_path
from coopduality.markovgraph import Fdg, MarkovQuery, block_factorization, block_fdg, block_query
from coopduality.probability import Alphabet, ConditionalPmf, JointPmf
from coopduality.regions import ChannelSpec, SourceSpec, WakAux
from coopduality.specfile import (
    SpecParseError,
    channel_from_doc,
    doc_from_channel,
    doc_from_graph,
    doc_from_source,
    doc_from_wak_aux,
    emit_spec,
    graph_from_doc,
    parse_spec,
    read_spec,
    source_from_doc,
    wak_aux_from_doc,
)

BUNDLED = ("dsbs_p010.src", "dsbs_p025.src", "dsbs_p010_y4.src", "blackwell.ch", "block.fdg", "collider.fdg",
           "marton_split.sys", "marton_inner.sys", "sdbc_capacity.sys")


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_files_round_trip(name):
    doc = read_spec(data_path(name))
    assert parse_spec(emit_spec(doc)) == doc


def test_aux_fixture_round_trip():
    src = source_from_doc(read_spec(data_path("dsbs_p010_y4.src")))
    aux = wak_aux_from_doc(read_spec(data_path("bsc_pair.wak")), src)
    doc = doc_from_wak_aux(aux, src)
    again = wak_aux_from_doc(parse_spec(emit_spec(doc)), src)
    np.testing.assert_array_equal(again.p_y_given_x1uv.table, aux.p_y_given_x1uv.table)


def test_source_contents():
    src = source_from_doc(read_spec(data_path("dsbs_p010.src")))
    np.testing.assert_allclose(src.joint.values, [[0.45, 0.05], [0.05, 0.45]])
    assert src.is_identity_map()


def test_channel_contents():
    ch = channel_from_doc(read_spec(data_path("blackwell.ch")))
    assert list(ch.f) == [0, 0, 1]
    assert ch.noisy.rows().argmax(axis=1).tolist() == [0, 1, 1]
    assert ch.is_deterministic()


def test_graph_round_trip_through_objects():
    doc = doc_from_graph(block_fdg(), block_factorization(), block_query())
    bundle = graph_from_doc(parse_spec(emit_spec(doc)))
    assert bundle.fdg.edges == block_fdg().edges
    assert bundle.query == block_query()


BAD = [
    ("kind: source\nalphabet X1 2\nalphabet X2 2\nalphabet Y 2\npmf X1 X2\n  0.5 0.5\n  0 oops\n", 7),
    ("kind: source\nalphabet X1 2\npmf X1\n  0.5 0.4\n", 3),
    ("kind: nonsense\n", 1),
    ("kind: source\nalphabet X1 zero\n", 2),
    ("kind: source\nalphabet X1 2\nalphabet X2 2\nalphabet Y 2\npmf X1 X2\n  0.5 0.5 0.0\n", 6),
    ("kind: channel\nalphabet X 2\nfrobnicate X\n", 3),
    ("kind: fdg\nnode A B\nedge A -> Q\n", 3),
]


@pytest.mark.parametrize("text,line", BAD)
def test_parse_errors_report_line(text, line):
    with pytest.raises(SpecParseError) as err:
        src = parse_spec(text)
        if src.kind == "source":
            source_from_doc(src)
        if src.kind == "fdg":
            graph_from_doc(src)
    assert err.value.line == line
    assert err.value.col >= 1


def test_alphabet_mismatch_is_a_parse_error():
    src = source_from_doc(read_spec(data_path("dsbs_p010.src")))
    with pytest.raises(SpecParseError, match="size"):
        wak_aux_from_doc(read_spec(data_path("bsc_pair.wak")), src)


def prob_rows(draw, rows, width):
    out = []
    for _ in range(rows):
        w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=width, max_size=width))) + 1e-3
        out.append(w / w.sum())
    return np.array(out)


@given(st.data())
def test_source_round_trip_property(data):
    n1, n2, ny = data.draw(st.integers(1, 3)), data.draw(st.integers(1, 3)), data.draw(st.integers(1, 4))
    joint = prob_rows(data.draw, 1, n1 * n2).reshape(n1, n2)
    f = [data.draw(st.integers(0, n1 - 1)) for _ in range(ny)]
    src = SourceSpec(JointPmf([Alphabet("X1", n1), Alphabet("X2", n2)], joint), f, Alphabet("Y", ny))
    again = source_from_doc(parse_spec(emit_spec(doc_from_source(src))))
    np.testing.assert_array_equal(again.joint.values, src.joint.values)
    np.testing.assert_array_equal(again.f, src.f)


@given(st.data())
def test_channel_round_trip_property(data):
    nx, n1, n2 = data.draw(st.integers(1, 4)), data.draw(st.integers(1, 3)), data.draw(st.integers(1, 3))
    X = Alphabet("X", nx)
    f = [data.draw(st.integers(0, n1 - 1)) for _ in range(nx)]
    ch = ChannelSpec(X, f, ConditionalPmf([Alphabet("Y2", n2)], [X], prob_rows(data.draw, nx, n2)), Alphabet("Y1", n1))
    again = channel_from_doc(parse_spec(emit_spec(doc_from_channel(ch))))
    np.testing.assert_array_equal(again.noisy.table, ch.noisy.table)
    np.testing.assert_array_equal(again.f, ch.f)


@given(st.integers(2, 6), st.data())
def test_graph_round_trip_property(n, data):
    names = [f"N{i}" for i in range(n)]
    edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n) if data.draw(st.booleans())]
    g = Fdg(names, edges)
    q = MarkovQuery(names[0], names[-1], names[1:2] if n > 2 else ())
    doc = doc_from_graph(g, None, q)
    text = emit_spec(doc)
    assert parse_spec(text) == doc
    assert graph_from_doc(parse_spec(text)).fdg.edges == g.edges
