from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopduality import data_path
from coopduality.entropyspace import (
    GE,
    LE,
    EntropyExpr,
    LinIneq,
    LinIneqSystem,
    SystemParseError,
    evaluate,
    expr_from_measure,
    feasible_witnesses,
    fme_eliminate,
    fme_eliminate_all,
    format_system,
    parse_system,
    remove_redundant,
    specialize_u1_y1,
    substitute,
    systems_equal,
)
from coopduality.probability import Alphabet, mutual_information, random_joint, uniform_joint

F = Fraction
S = frozenset


def ineq(lhs, rel, const=0, terms=None):
    return LinIneq({k: F(v) for k, v in lhs.items()}, rel, EntropyExpr(terms or {}, const))


def load(name):
    return parse_system(data_path(name).read_text())


def test_measure_expansions():
    assert expr_from_measure("H", "X").terms == {S("X"): 1}
    assert expr_from_measure("I", "X", "Y").terms == {S("X"): 1, S("Y"): 1, S("XY"): -1}
    cmi = expr_from_measure("I", ["U"], ["Y2"], ["V"])
    assert cmi.terms == {S(["U", "V"]): 1, S(["Y2", "V"]): 1, S(["U", "V", "Y2"]): -1, S(["V"]): -1}


def test_cmi_expansion_matches_probability_module():
    rng = np.random.default_rng(20)
    axes = [Alphabet("U", 2), Alphabet("V", 3), Alphabet("Y2", 2)]
    expr = expr_from_measure("I", ["U"], ["Y2"], ["V"])
    for _ in range(20):
        p = random_joint(rng, axes)
        assert evaluate(expr, p) == pytest.approx(mutual_information(p, "U", "Y2", "V"), abs=1e-9)


def test_evaluate_oracles():
    X, Y = Alphabet("X", 2), Alphabet("Y", 2)
    assert evaluate(expr_from_measure("H", "X"), uniform_joint([X])) == pytest.approx(1.0)
    assert evaluate(expr_from_measure("I", "X", "Y"), uniform_joint([X, Y])) == pytest.approx(0.0, abs=1e-12)


def test_substitute_split():
    sys_ = LinIneqSystem(S("X"), ("R1",), (ineq({"R1": 1}, LE, 3),))
    out = substitute(sys_, "R1", {"R10": 1, "R11": 1})
    assert out.vars == ("R10", "R11")
    assert out.ineqs[0].lhs == {"R10": 1, "R11": 1}
    assert out.ineqs[0].rhs.constant == 3


def test_substitute_leaves_other_ineqs():
    q = ineq({"R2": 1}, LE, 1)
    sys_ = LinIneqSystem(S("X"), ("R1", "R2"), (ineq({"R1": 1}, LE, 3), q))
    out = substitute(sys_, "R1", {"R10": 1, "R11": 1})
    assert out.ineqs[1] is q


def test_fme_textbook_example():
    sys_ = LinIneqSystem(S("X"), ("x", "y"), (ineq({"x": 1}, LE, 3), ineq({"x": 1}, GE, 1), ineq({"y": 1, "x": -1}, LE)))
    out = fme_eliminate(sys_, "x")
    want = LinIneqSystem(S("X"), ("y",), (ineq({"y": 1}, LE, 3), ineq({}, LE, 2)))
    assert out.vars == ("y",)
    rates = [q for q in out.ineqs if q.lhs]
    consts = [q for q in out.ineqs if not q.lhs]
    assert [q.key() for q in rates] == [ineq({"y": 1}, LE, 3).key()]
    # 1 <= 3 is stored as the true constant inequality 0 <= 2
    assert len(consts) == 1 and consts[0].rhs.constant > 0
    assert systems_equal(out, want, include_constant=True)


def test_fme_with_only_upper_bounds_adds_nothing():
    sys_ = LinIneqSystem(S("X"), ("x", "y"), (ineq({"x": 1}, LE, 3), ineq({"x": 1, "y": 1}, LE, 5), ineq({"y": 1}, LE, 4)))
    out = fme_eliminate(sys_, "x")
    assert [q.key() for q in out.ineqs] == [ineq({"y": 1}, LE, 4).key()]


def test_redundancy_removal_examples():
    rng = np.random.default_rng(1)
    hx = {S("X"): F(1)}
    dup = LinIneqSystem(S("X"), ("R1",), (ineq({"R1": 1}, LE, 1), ineq({"R1": 2}, LE, 2)))
    wit = [random_joint(rng, [Alphabet("X", 2)]) for _ in range(5)]
    assert len(remove_redundant(dup, wit).ineqs) == 1
    loose = LinIneqSystem(S("X"), ("R1",), (ineq({"R1": 1}, LE, 1), ineq({"R1": 1}, LE, 1, hx)))
    kept = remove_redundant(loose, wit).ineqs
    assert len(kept) == 1 and not kept[0].rhs.terms


def test_split_system_reduces_to_inner_bound():
    split, inner = load("marton_split.sys"), load("marton_inner.sys")
    assert set(split.vars) == {"R12", "R1", "R2", "R10", "R11", "R20", "R22", "R1'", "R2'"}
    out = fme_eliminate_all(split, [v for v in split.vars if v not in ("R12", "R1", "R2")])
    out = remove_redundant(out, feasible_witnesses(split, np.random.default_rng(0), 50))
    assert len(out.rate_ineqs()) == 4
    assert systems_equal(out, inner)


def test_specialization_gives_capacity_bounds():
    inner, cap = load("marton_inner.sys"), load("sdbc_capacity.sys")
    spec = specialize_u1_y1(inner)
    assert systems_equal(spec, cap)
    assert spec.ground_set == S(["V", "U", "Y1", "Y2"])


def test_specialization_leaves_u1_free_subsets():
    q = LinIneq({"R": F(1)}, LE, EntropyExpr({S(["V", "Y2"]): F(1)}))
    sys_ = LinIneqSystem(S(["V", "U1", "U2", "Y1", "Y2"]), ("R",), (q,))
    assert specialize_u1_y1(sys_).ineqs[0].rhs.terms == {S(["V", "Y2"]): F(1)}


def test_parse_errors_carry_position():
    with pytest.raises(SystemParseError) as err:
        parse_system("kind: ineq-system\nground: X\nvars: R\nR <= H(Q)\n")
    assert err.value.line == 4
    with pytest.raises(SystemParseError):
        parse_system("R <= 1\n")


def test_format_round_trip_of_bundled_systems():
    for name in ("marton_split.sys", "marton_inner.sys", "sdbc_capacity.sys"):
        sys_ = load(name)
        again = parse_system(format_system(sys_))
        assert systems_equal(sys_, again, include_constant=True)
        assert again.vars == sys_.vars and again.nonneg == sys_.nonneg


coef = st.fractions(min_value=-4, max_value=4, max_denominator=4)


@st.composite
def systems(draw):
    n = draw(st.integers(1, 5))
    ineqs = []
    for _ in range(n):
        lhs = {v: draw(coef) for v in ("a", "b", "c") if draw(st.booleans())}
        terms = {S(s): draw(coef) for s in (("X",), ("X", "Y")) if draw(st.booleans())}
        ineqs.append(LinIneq(lhs, draw(st.sampled_from([LE, GE])), EntropyExpr(terms, draw(coef))))
    return LinIneqSystem(S(["X", "Y"]), ("a", "b", "c"), tuple(ineqs))


@given(systems())
def test_format_parse_round_trip(sys_):
    again = parse_system(format_system(sys_))
    assert systems_equal(sys_, again, include_constant=True)


@given(systems(), st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2))
def test_fme_projection_is_sound(sys_, point, hx):
    """Any point satisfying the system still satisfies its projection."""
    vals = dict(zip(("a", "b", "c"), point))
    ent = {S(["X"]): hx, S(["X", "Y"]): 1.5}

    def holds(q):
        le = q.as_le()
        lhs = sum(float(c) * vals[v] for v, c in le.lhs.items())
        rhs = float(le.rhs.constant) + sum(float(c) * ent[s] for s, c in le.rhs.terms.items())
        return lhs <= rhs + 1e-9

    if all(holds(q) for q in sys_.ineqs):
        assert all(holds(q) for q in fme_eliminate(sys_, "a").ineqs)
