"""Binning/superposition scheme for the cooperative WAK coordination problem.

Encoder 1 covers x1 with a V codeword and sends its bin over the cooperation
link; encoder 2 recovers the V codeword from that bin using x2, then covers x2
with a U codeword drawn on top of it. Two variants correspond to the two corner
points: corner 1 bins the U codebooks and recovers x1 from V alone, corner 2
sends the U index in full and recovers x1 from (V, U).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..probability import InfoCalc, JointPmf, marginalize
from ..regions import SourceSpec, WakAux, compose_wak, wak_violations
from .common import (
    SimConfig,
    SimConfigError,
    TrialReport,
    TypicalityRef,
    check_size,
    codebook_rng,
    codebook_size,
    draw_conditional,
    draw_iid,
    empirical_tv,
    permutation_bins,
    trial_rng,
)
from .decode import first_match

RATE_TOL = 1e-12
WAK_STAGES = ("enc1_cover", "enc2_decode_v", "enc2_cover", "dec_x1", "dec_u")


def conditional_rows(p: JointPmf, target: tuple[str, ...], given: tuple[str, ...]) -> np.ndarray:
    """Rows P(target | given) in mixed-radix order of ``given``; empty rows become uniform."""
    joint = marginalize(p, given + target).reorder(given + target)
    g = int(np.prod([joint.axis(a).size for a in given], dtype=np.int64))
    t = joint.values.reshape(g, -1)
    mass = t.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = np.where(mass > 0, t / np.where(mass > 0, mass, 1), 1.0 / t.shape[1])
    return rows


def wak_rates(p: JointPmf, theta: float, corner: int) -> dict[str, float]:
    """Rates that meet each scheme condition with a factor 1/theta of slack.

    Lower-bounded rates are the bound divided by theta; differences that must stay
    below a bound are set to theta times it.
    """
    m = InfoCalc(p)
    r_v = m.I("V", "X1") / theta
    rates = {"R_V": r_v, "R12": max(0.0, r_v - theta * m.I("V", "X2")), "R_U": m.I("U", "X2", "V") / theta}
    if corner == 1:
        rates["R1p"] = m.H("X1", "V") / theta
        rates["R2p"] = max(0.0, rates["R_U"] - theta * m.I("U", "X1", "V"))
    else:
        rates["R1p"] = m.H("X1", ("V", "U")) / theta
    return rates


def wak_rate_violations(p: JointPmf, rates: dict[str, float], corner: int) -> list[str]:
    m = InfoCalc(p)
    out = []

    def need(ok: bool, text: str) -> None:
        if not ok:
            out.append(text)

    need(rates["R_V"] >= m.I("V", "X1") - RATE_TOL, "R_V > I(V;X1)")
    need(rates["R_V"] - rates["R12"] <= m.I("V", "X2") + RATE_TOL, "R_V - R12 < I(V;X2)")
    need(rates["R_U"] >= m.I("U", "X2", "V") - RATE_TOL, "R_U > I(U;X2|V)")
    if corner == 1:
        need(rates["R1p"] >= m.H("X1", "V") - RATE_TOL, "R1' > H(X1|V)")
        need(rates["R_U"] - rates["R2p"] <= m.I("U", "X1", "V") + RATE_TOL, "R_U - R2' < I(U;X1|V)")
    else:
        need(rates["R1p"] >= m.H("X1", ("V", "U")) - RATE_TOL, "R1' > H(X1|V,U)")
    for k, v in rates.items():
        need(v >= 0, f"{k} >= 0")
    return out


@dataclass
class WakCodebookSet:
    n: int
    rates: dict
    c_v: np.ndarray            # [M_V, n]
    v_bins: np.ndarray         # [M_V]
    x1_bins: np.ndarray        # bin of every x1 sequence, by mixed-radix index
    x1_bin_members: np.ndarray  # sequence indices sorted by bin
    x1_bin_starts: np.ndarray
    u_size: int
    u_bins: int                # number of U bins (corner 1); 1 means no binning
    seed: int
    p_u_given_v: np.ndarray
    u_alphabet: int
    _u_cache: dict = field(default_factory=dict, repr=False)

    def c_u(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """U codebook on top of V codeword i and its bin labels; generated on demand."""
        hit = self._u_cache.get(i)
        if hit is None:
            rng = codebook_rng(self.seed, 3, i)
            v = self.c_v[i]
            cb = draw_conditional(rng, self.p_u_given_v, np.broadcast_to(v, (self.u_size, self.n)))
            bins = permutation_bins(rng, self.u_size, self.u_bins)
            hit = (cb, bins)
            self._u_cache[i] = hit
        return hit

    def x1_bin_of(self, x1_index: int) -> int:
        return int(self.x1_bins[x1_index])

    def x1_bin(self, t: int) -> np.ndarray:
        return self.x1_bin_members[self.x1_bin_starts[t]:self.x1_bin_starts[t + 1]]


def _sequence_index(seq: np.ndarray, q: int) -> int:
    idx = 0
    for s in seq:
        idx = idx * q + int(s)
    return idx


def _index_digits(idx: np.ndarray, q: int, n: int) -> np.ndarray:
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def build_wak_codebooks(p: JointPmf, q1: int, rates: dict[str, float], cfg: SimConfig, corner: int) -> WakCodebookSet:
    n, cap = cfg.n, cfg.codebook_cap
    m_v = codebook_size(rates["R_V"], n)
    m_u = codebook_size(rates["R_U"], n)
    check_size("C_V", m_v, cap)
    check_size("C_U(v)", m_u, cap)
    n_x1 = q1 ** n
    check_size("x1 sequence set", n_x1, cap)
    p_v = marginalize(p, ("V",)).values
    c_v = draw_iid(codebook_rng(cfg.seed, 0), p_v, (m_v, n))
    v_bins = permutation_bins(codebook_rng(cfg.seed, 1), m_v, codebook_size(rates["R12"], n))
    b1 = min(codebook_size(rates["R1p"], n), n_x1)
    x1_bins = permutation_bins(codebook_rng(cfg.seed, 2), n_x1, b1)
    order = np.argsort(x1_bins, kind="stable")
    starts = np.searchsorted(x1_bins[order], np.arange(b1 + 1))
    u_bins = codebook_size(rates["R2p"], n) if corner == 1 else 1
    return WakCodebookSet(n, dict(rates), c_v, v_bins, x1_bins, order, starts, m_u, u_bins, cfg.seed,
                          conditional_rows(p, ("U",), ("V",)), p.axis("U").size)


def _prepare(src: SourceSpec, aux: WakAux, cfg: SimConfig, corner: int):
    p = compose_wak(src, aux)
    bad = wak_violations(src, aux, p)
    if bad:
        raise SimConfigError("auxiliary does not produce an admissible coordination PMF: " + "; ".join(bad))
    rates = dict(cfg.rates) if cfg.rates is not None else wak_rates(p, cfg.theta, corner)
    missing = {"R_V", "R12", "R_U", "R1p"} | ({"R2p"} if corner == 1 else set())
    if not missing <= set(rates):
        raise SimConfigError(f"explicit rates must define {sorted(missing)}")
    viol = wak_rate_violations(p, rates, corner)
    if viol and not cfg.allow_infeasible:
        raise SimConfigError("rates violate: " + ", ".join(viol))
    cbs = build_wak_codebooks(p, src.x1.size, rates, cfg, corner)
    return p, rates, cbs


def _simulate(src: SourceSpec, aux: WakAux, cfg: SimConfig, corner: int) -> TrialReport:
    p, rates, cb = _prepare(src, aux, cfg, corner)
    n, eps = cfg.n, cfg.eps
    q1 = src.x1.size
    ref_vx1 = TypicalityRef(p, ("V", "X1"), n, eps)
    ref_vx2 = TypicalityRef(p, ("V", "X2"), n, eps)
    ref_vux2 = TypicalityRef(p, ("V", "U", "X2"), n, eps)
    ref_vux1 = TypicalityRef(p, ("V", "U", "X1"), n, eps)
    src_vals = src.joint.values.reshape(-1)
    y_rows = aux.p_y_given_x1uv.rows()
    nu, nv = aux.u_alphabet.size, aux.v_alphabet.size
    target = marginalize(p, ("X1", "X2", "Y")).reorder(("X1", "X2", "Y")).values
    v_order = np.argsort(cb.v_bins, kind="stable")
    v_starts = np.searchsorted(cb.v_bins[v_order], np.arange(int(cb.v_bins.max()) + 2))

    stages = dict.fromkeys(WAK_STAGES if corner == 1 else WAK_STAGES[:4], 0)
    err_all = err1 = err2 = 0
    tvs = np.empty(cfg.trials)
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        pair = draw_iid(rng, src_vals, n)
        x1, x2 = pair // src.x2.size, pair % src.x2.size

        # encoder 1: first V codeword jointly typical with x1
        i, found = first_match(ref_vx1.mask(cb.c_v, x1[None, :]))
        stages["enc1_cover"] += not found
        t12 = int(cb.v_bins[i])
        t1 = cb.x1_bin_of(_sequence_index(x1, q1))

        # encoder 2: recover V from the cooperation bin with x2 as side information
        members = v_order[v_starts[t12]:v_starts[t12 + 1]]
        k, _ = first_match(ref_vx2.mask(cb.c_v[members], x2[None, :]))
        i_hat = int(members[k])
        stages["enc2_decode_v"] += i_hat != i
        c_u, u_bins = cb.c_u(i_hat)
        j, found = first_match(ref_vux2.mask(cb.c_v[i_hat][None, :], c_u, x2[None, :]))
        stages["enc2_cover"] += not found

        cands = cb.x1_bin(t1)
        digits = _index_digits(cands, q1, n)
        if corner == 1:
            v_dec = cb.c_v[i]
            k, _ = first_match(ref_vx1.mask(v_dec[None, :], digits))
            x1_hat = digits[k]
            bad1 = not np.array_equal(x1_hat, x1)
            stages["dec_x1"] += bad1
            c_u_dec, u_bins_dec = cb.c_u(i)
            in_bin = np.flatnonzero(u_bins_dec == u_bins[j])
            k, _ = first_match(ref_vux1.mask(v_dec[None, :], c_u_dec[in_bin], x1_hat[None, :]))
            j_hat = int(in_bin[k])
            stages["dec_u"] += j_hat != j or i_hat != i
            u_dec = c_u_dec[j_hat]
            bad2 = not (i_hat == i and np.array_equal(u_dec, c_u[j]))
        else:
            v_dec, u_dec = cb.c_v[i_hat], c_u[j]
            k, _ = first_match(ref_vux1.mask(v_dec[None, :], u_dec[None, :], digits))
            x1_hat = digits[k]
            bad1 = not np.array_equal(x1_hat, x1)
            stages["dec_x1"] += bad1
            bad2 = False

        y = draw_conditional(rng, y_rows, (x1_hat * nu + u_dec) * nv + v_dec)
        tvs[t] = empirical_tv(target, x1, x2, y)
        err1 += bad1
        err2 += bad2
        err_all += bad1 or bad2

    return TrialReport(f"wak{corner}", n, float(cfg.theta), cfg.seed, cfg.trials, int(err_all), int(err1),
                       int(err2), float(tvs.mean()), float(tvs.std()), {k: int(v) for k, v in stages.items()},
                       {k: float(v) for k, v in sorted(rates.items())})


def simulate_wak_corner1(src: SourceSpec, aux: WakAux, cfg: SimConfig) -> TrialReport:
    return _simulate(src, aux, cfg, 1)


def simulate_wak_corner2(src: SourceSpec, aux: WakAux, cfg: SimConfig) -> TrialReport:
    return _simulate(src, aux, cfg, 2)
