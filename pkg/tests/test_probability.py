import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopduality.probability import (
    Alphabet,
    ConditionalPmf,
    InfoCalc,
    JointPmf,
    PmfError,
    Sequence,
    binary_entropy,
    compose,
    conditional_entropy,
    deterministic_conditional,
    empirical_pmf,
    entropy,
    is_typical,
    marginalize,
    mutual_information,
    random_conditional,
    random_joint,
    total_variation,
    typical_count_bounds,
    uniform_joint,
    verify_markov_numeric,
)

from strategies import joints

X, Y, Z = Alphabet("X", 2), Alphabet("Y", 2), Alphabet("Z", 2)


def bern(p, ax=X):
    return JointPmf([ax], [1 - p, p])


def test_marginalize_uniform_square():
    m = marginalize(uniform_joint([X, Y]), ["X"])
    assert m.names == ("X",)
    np.testing.assert_allclose(m.values, [0.5, 0.5])


def test_marginalize_keep_all_is_identity():
    p = JointPmf([X, Y], [[0.1, 0.2], [0.3, 0.4]])
    np.testing.assert_array_equal(marginalize(p, ["X", "Y"]).values, p.values)


def test_marginalize_diagonal():
    p = JointPmf([X, Y], [[0.5, 0], [0, 0.5]])
    np.testing.assert_allclose(marginalize(p, "X").values, [0.5, 0.5])


def test_compose_identity_channel_gives_diagonal():
    p = compose(bern(0.5), deterministic_conditional(Y, [X], [0, 1]))
    np.testing.assert_allclose(p.values.reshape(-1), [0.5, 0, 0, 0.5])


def test_compose_constant_channel_is_product():
    base = JointPmf([X], [0.3, 0.7])
    p = compose(base, deterministic_conditional(Y, [X], [1, 1]))
    np.testing.assert_allclose(p.values, np.outer([0.3, 0.7], [0.0, 1.0]))


def test_compose_ternary_against_elementwise_product():
    T = Alphabet("X", 3)
    noisy = ConditionalPmf([Alphabet("Y2", 2)], [T], [[0.9, 0.1], [0.1, 0.9], [0.1, 0.9]])
    p = compose(compose(uniform_joint([T]), deterministic_conditional(Alphabet("Y1", 2), [T], [0, 0, 1])), noisy)
    want = np.zeros((3, 2, 2))
    for x in range(3):
        for y1 in range(2):
            for y2 in range(2):
                want[x, y1, y2] = (1 / 3) * (y1 == (x == 2)) * noisy.table[x, y2]
    np.testing.assert_allclose(p.values, want)
    np.testing.assert_allclose(marginalize(p, "Y1").values, [2 / 3, 1 / 3])


def test_entropy_oracles():
    assert entropy(bern(0.5), "X") == pytest.approx(1.0)
    assert entropy(bern(0.0), "X") == 0.0
    assert entropy(bern(0.25), "X") == pytest.approx(0.8112781244591328, abs=1e-12)


def test_mutual_information_oracles():
    assert mutual_information(uniform_joint([X, Y]), "X", "Y") == 0.0
    same = JointPmf([X, Y], [[0.5, 0], [0, 0.5]])
    assert mutual_information(same, "X", "Y") == pytest.approx(1.0)
    bsc = JointPmf([X, Y], [[0.45, 0.05], [0.05, 0.45]])
    assert mutual_information(bsc, "X", "Y") == pytest.approx(1 - binary_entropy(0.1), abs=1e-12)
    assert mutual_information(bsc, "X", "Y") == pytest.approx(0.531, abs=5e-4)


def test_mutual_information_rejects_overlap():
    with pytest.raises(PmfError):
        mutual_information(uniform_joint([X, Y]), "X", ["X", "Y"])


def test_total_variation_oracles():
    p = JointPmf([X], [0.5, 0.5])
    assert total_variation(p, p) == 0.0
    assert total_variation(bern(0.0), bern(1.0)) == pytest.approx(1.0)
    assert total_variation(p, JointPmf([X], [0.75, 0.25])) == pytest.approx(0.25)


def test_empirical_pmf_oracles():
    np.testing.assert_allclose(empirical_pmf([Sequence(X, [0, 1, 0, 1])]).values, [0.5, 0.5])
    np.testing.assert_allclose(empirical_pmf([Sequence(X, [1, 1, 1])]).values, [0, 1])
    pair = empirical_pmf([Sequence(X, [0, 0, 1, 1]), Sequence(Y, [0, 1, 0, 1])])
    np.testing.assert_allclose(pair.values.reshape(-1), [0.25] * 4)


def test_typicality_oracles():
    fair = JointPmf([X], [0.5, 0.5])
    exact = Sequence(X, [0, 1, 0, 1, 1, 0, 0, 1])
    for eps in (0.0, 0.01, 0.5):
        assert is_typical([exact], fair, eps)
    assert not is_typical([Sequence(X, [0, 0, 1, 0])], JointPmf([X], [1.0, 0.0]), 0.9)
    nu = Sequence(X, [0, 0, 0, 0, 0, 1, 1, 1])  # (0.625, 0.375)
    assert is_typical([nu], fair, 0.3)
    assert not is_typical([nu], fair, 0.2)


def test_typical_count_bounds_match_definition():
    lo, hi = typical_count_bounds(np.array([0.5, 0.5]), 8, 0.25)
    np.testing.assert_array_equal(lo, [3, 3])
    np.testing.assert_array_equal(hi, [5, 5])
    with pytest.raises(PmfError):
        typical_count_bounds(np.array([1.0]), 4, -0.1)


def test_markov_numeric_oracles():
    rng = np.random.default_rng(4)
    A, B, C = Alphabet("A", 2), Alphabet("B", 3), Alphabet("C", 2)
    p = compose(compose(random_joint(rng, [A]), random_conditional(rng, [B], [A])), random_conditional(rng, [C], [B]))
    assert verify_markov_numeric(p, "A", "C", "B")
    triple = JointPmf([A, Alphabet("B", 2), C], np.array([[[0.5, 0], [0, 0]], [[0, 0], [0, 0.5]]]))
    assert not verify_markov_numeric(triple, "A", "B", [], tol=1e-9)


def test_markov_numeric_detects_dependence():
    rng = np.random.default_rng(0)
    A, B, C = Alphabet("A", 2), Alphabet("B", 2), Alphabet("C", 2)
    for _ in range(200):
        p = random_joint(rng, [A, B, C], 0.5)
        cmi = mutual_information(p, "A", "B", "C")
        if abs(cmi - 0.12) < 0.03:
            break
    assert cmi > 1e-6
    assert not verify_markov_numeric(p, "A", "B", "C", tol=1e-6)


def test_malformed_pmfs_raise():
    with pytest.raises(PmfError):
        JointPmf([X], [0.5, 0.6])
    with pytest.raises(PmfError):
        JointPmf([X, Alphabet("X", 2)], [[0.25, 0.25], [0.25, 0.25]])
    with pytest.raises(PmfError):
        ConditionalPmf([Y], [X], [[0.5, 0.4], [0.5, 0.5]])


# --- properties ---------------------------------------------------------------------------

@given(joints())
def test_entropy_bounds(p):
    for name in p.names:
        h = entropy(p, name)
        assert -1e-12 <= h <= math.log2(p.axis(name).size) + 1e-9


@given(joints())
def test_information_nonnegative_and_symmetric(p):
    m = InfoCalc(p)
    ab = m.I("A", "B", "C")
    assert ab >= 0
    assert ab == pytest.approx(m.I("B", "A", "C"), abs=1e-9)
    assert m.I("A", "B") <= min(m.H("A"), m.H("B")) + 1e-9


@given(joints())
def test_chain_rule(p):
    lhs = entropy(p, ["A", "B", "C"])
    rhs = entropy(p, "A") + conditional_entropy(p, "B", "A") + conditional_entropy(p, "C", ["A", "B"])
    assert lhs == pytest.approx(rhs, abs=1e-9)


@given(joints())
def test_conditioning_reduces_entropy(p):
    assert conditional_entropy(p, "A", ["B", "C"]) <= conditional_entropy(p, "A", "B") + 1e-9


@given(joints(), joints())
def test_total_variation_metric(p, q):
    if p.shape != q.shape:
        q = p
    d = total_variation(p, q)
    assert 0 <= d <= 1 + 1e-12
    assert d == pytest.approx(total_variation(q, p))


@given(joints())
def test_marginalize_preserves_mass(p):
    for keep in (["A"], ["B", "C"], ["C", "A"]):
        assert marginalize(p, keep).values.sum() == pytest.approx(1.0)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=30))
def test_type_of_sequence_is_always_typical_to_itself(symbols):
    T = Alphabet("X", 3)
    seq = Sequence(T, symbols)
    ref = empirical_pmf([seq])
    assert is_typical([seq], ref, 0.0)
