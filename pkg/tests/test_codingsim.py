import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from coopduality import data_path
from coopduality.codingsim import (
    SPLIT_NAMES,
    SimConfig,
    SimConfigError,
    covering_search,
    deterministic_output_aux,
    reports_to_csv,
    simulate_bc,
    simulate_wak_corner1,
    simulate_wak_corner2,
    stages_to_long_csv,
    typicality_decode,
    wilson_interval,
)
from coopduality.codingsim import kernels
from coopduality.codingsim.common import TypicalityRef, codebook_rng, draw_iid
from coopduality.probability import Alphabet, JointPmf, uniform_joint
from coopduality.regions import WakAux
from coopduality.specfile import channel_from_doc, read_spec, source_from_doc, wak_aux_from_doc


@pytest.fixture(scope="module")
def dsbs():
    return source_from_doc(read_spec(data_path("dsbs_p010.src")))


@pytest.fixture(scope="module")
def dsbs_y4():
    return source_from_doc(read_spec(data_path("dsbs_p010_y4.src")))


@pytest.fixture(scope="module")
def bsc_aux(dsbs_y4):
    return wak_aux_from_doc(read_spec(data_path("bsc_pair.wak")), dsbs_y4)


@pytest.fixture(scope="module")
def blackwell():
    return channel_from_doc(read_spec(data_path("blackwell.ch")))


def constant_aux(src):
    py = np.zeros((2, 1, 1, 2))
    py[0, :, :, 0] = py[1, :, :, 1] = 1
    return WakAux.from_arrays(src, np.ones((2, 1)), np.ones((2, 1, 1)), py)


def test_wak_degenerate_scheme_has_no_decode_failures(dsbs):
    for sim in (simulate_wak_corner1, simulate_wak_corner2):
        r = sim(dsbs, constant_aux(dsbs), SimConfig(n=8, trials=100, seed=0))
        assert r.rates["R_V"] == 0 and r.rates["R12"] >= 0
        assert r.stage_failures["enc2_decode_v"] == 0
        assert r.stage_failures.get("dec_u", 0) == 0
        assert r.errors_overall == r.stage_failures["dec_x1"] == 0


def test_wak_codebook_cap(dsbs_y4, bsc_aux):
    with pytest.raises(SimConfigError, match="cap"):
        simulate_wak_corner1(dsbs_y4, bsc_aux, SimConfig(n=16, trials=1, codebook_cap=64))


def test_wak_infeasible_rates_rejected(dsbs_y4, bsc_aux):
    with pytest.raises(SimConfigError):
        SimConfig(n=8, trials=1, theta=1.5)
    rates = {"R_V": 0.0, "R12": 0.0, "R_U": 0.0, "R1p": 0.0, "R2p": 0.0}
    with pytest.raises(SimConfigError, match="R_V > I"):
        simulate_wak_corner1(dsbs_y4, bsc_aux, SimConfig(n=8, trials=1, rates=rates))


def test_config_guards():
    for bad in (dict(n=0, trials=1), dict(n=1, trials=0), dict(n=1, trials=1, eps=-1), dict(n=1, trials=1, theta=0)):
        with pytest.raises(SimConfigError):
            SimConfig(**bad)


def test_wak_reports_are_reproducible_and_consistent(dsbs_y4, bsc_aux):
    cfg = SimConfig(n=8, trials=60, seed=5, eps=0.9)
    a = simulate_wak_corner1(dsbs_y4, bsc_aux, cfg)
    b = simulate_wak_corner1(dsbs_y4, bsc_aux, cfg)
    assert a == b
    assert reports_to_csv([a]) == reports_to_csv([b])
    assert a.union_bound_holds()
    assert 0 <= a.error_rate_overall <= 1 and 0 <= a.mean_tv <= 1
    c = simulate_wak_corner2(dsbs_y4, bsc_aux, cfg)
    assert c.union_bound_holds() and c.errors_dec2 == 0


def test_wak_seed_changes_outcome(dsbs_y4, bsc_aux):
    a = simulate_wak_corner1(dsbs_y4, bsc_aux, SimConfig(n=8, trials=60, seed=1, eps=0.9))
    b = simulate_wak_corner1(dsbs_y4, bsc_aux, SimConfig(n=8, trials=60, seed=2, eps=0.9))
    assert (a.errors_overall, a.mean_tv) != (b.errors_overall, b.mean_tv)


def test_bc_single_message_pair_never_fails(blackwell):
    X = blackwell.x_alphabet
    aux3 = JointPmf([Alphabet("V", 1), Alphabet("U1", 1), Alphabet("U2", 1), X], np.full((1, 1, 1, 3), 1 / 3))
    for n in (1, 4, 12):
        r = simulate_bc(blackwell, aux3, SimConfig(n=n, trials=50, seed=0, rates=dict.fromkeys(SPLIT_NAMES, 0.0)))
        assert r.errors_overall == 0


def test_bc_reproducible(blackwell):
    aux3 = deterministic_output_aux(blackwell, blackwell.p_x)
    cfg = SimConfig(n=8, trials=40, seed=3, eps=0.5)
    a, b = simulate_bc(blackwell, aux3, cfg), simulate_bc(blackwell, aux3, cfg)
    assert a == b and a.union_bound_holds()
    assert "stage" in stages_to_long_csv([a]).splitlines()[0]


def test_bc_missing_split_rates(blackwell):
    aux3 = deterministic_output_aux(blackwell, blackwell.p_x)
    with pytest.raises(SimConfigError, match="explicit rates"):
        simulate_bc(blackwell, aux3, SimConfig(n=4, trials=1, rates={"R10": 0.0}))


# --- primitives ---------------------------------------------------------------------

def test_covering_all_typical_is_uniform():
    mask = np.ones((3, 4), dtype=bool)
    counts = np.zeros(12)
    for s in range(2400):
        res = covering_search(mask, np.random.default_rng([7, s]))
        assert res.found and res.candidates == 12
        counts[res.pair[0] * 4 + res.pair[1]] += 1
    assert chisquare(counts).pvalue > 1e-3


def test_covering_fallback_returns_a_pair():
    res = covering_search(np.zeros((2, 3), dtype=bool), np.random.default_rng(0))
    assert not res.found and 0 <= res.pair[0] < 2 and 0 <= res.pair[1] < 3


def test_covering_success_grows_with_codebook():
    """More candidate pairs means the covering search succeeds more often."""
    V = Alphabet("V", 1)
    U1, U2 = Alphabet("U1", 2), Alphabet("U2", 2)
    p = JointPmf([V, U1, U2], np.array([[[0.35, 0.15], [0.15, 0.35]]]))  # I(U1;U2) = 1 - h(0.3) ~ 0.119
    n = 16
    ref = TypicalityRef(p, ("V", "U1", "U2"), n, 0.5)
    v = np.zeros((1, n), dtype=np.int64)
    rates = {}
    for side in (1, 4):  # R1'+R2' = 0 and 0.25 bits
        hits = 0
        for t in range(500):
            rng = np.random.default_rng([11, side, t])
            a = draw_iid(rng, [0.5, 0.5], (side, n))
            b = draw_iid(rng, [0.5, 0.5], (side, n))
            hits += covering_search(ref.pair([v, a], b), rng).found
        rates[side] = hits / 500
    assert rates[4] > rates[1]


def test_typicality_decode_cases():
    X, Y = Alphabet("X", 2), Alphabet("Y", 2)
    p = JointPmf([X, Y], [[0.45, 0.05], [0.05, 0.45]])
    assert typicality_decode(np.zeros((0, 6), dtype=int), np.zeros(6, dtype=int), p, 0.5).status == "none"
    same = JointPmf([X, Y], [[0.5, 0.0], [0.0, 0.5]])
    word = np.array([0, 1, 1, 0, 1, 0, 0, 1, 0, 1])
    assert typicality_decode(word[None, :], word, same, 0.5).ok
    assert typicality_decode(np.stack([word, word]), word, same, 0.5).status == "ambiguous"


def test_typicality_decode_finds_transmitted_codeword():
    X, Y = Alphabet("X", 2), Alphabet("Y", 2)
    p = JointPmf([X, Y], [[0.475, 0.025], [0.025, 0.475]])
    n = 400
    for seed in range(5):
        rng = codebook_rng(seed, 9)
        book = draw_iid(rng, [0.5, 0.5], (32, n))
        k = int(rng.integers(32))
        noise = (rng.random(n) < 0.05).astype(np.int64)
        res = typicality_decode(book, book[k] ^ noise, p, 0.9)
        assert res.ok and res.index == k


def test_wilson_interval_covers_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 50)[0] == 0.0


@given(st.integers(1, 40), st.integers(1, 30), st.integers(1, 4), st.integers(0, 2**20))
def test_kernel_backends_agree(n, rows, k, seed):
    rng = np.random.default_rng(seed)
    cells = 2 * k
    probs = rng.dirichlet(np.ones(cells))
    from coopduality.probability import typical_count_bounds

    lo, hi = typical_count_bounds(probs, n, 0.5)
    codes = rng.integers(0, cells, (rows, n))
    a = kernels.typical_mask(codes, lo, hi, backend="numpy")
    b = kernels.typical_mask(codes, lo, hi, backend="numba")
    np.testing.assert_array_equal(a, b)
    left, right = rng.integers(0, k, (rows, n)), rng.integers(0, 2, (3, n))
    np.testing.assert_array_equal(kernels.pair_mask(left, right, 2, lo, hi, backend="numpy"),
                                  kernels.pair_mask(left, right, 2, lo, hi, backend="numba"))


def test_env_flag_selects_numpy_with_identical_reports(monkeypatch, dsbs_y4, bsc_aux, blackwell):
    cfg = SimConfig(n=8, trials=30, seed=4, eps=0.9)
    fast = simulate_wak_corner1(dsbs_y4, bsc_aux, cfg)
    bc_fast = simulate_bc(blackwell, deterministic_output_aux(blackwell, blackwell.p_x), cfg)
    monkeypatch.setenv(kernels.ENV_FLAG, "1")
    assert kernels.backend_name() == "numpy"
    assert simulate_wak_corner1(dsbs_y4, bsc_aux, cfg) == fast
    assert simulate_bc(blackwell, deterministic_output_aux(blackwell, blackwell.p_x), cfg) == bc_fast


def test_uniform_target_for_identity_typicality():
    ref = TypicalityRef(uniform_joint([Alphabet("X", 2)]), ("X",), 4, 0.0)
    assert ref.check(np.array([0, 1, 1, 0]))
    assert not ref.check(np.array([0, 0, 0, 1]))
