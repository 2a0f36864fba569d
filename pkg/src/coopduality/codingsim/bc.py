"""Marton coding with rate splitting and cooperative binning over an SD-BC.

Messages split into public parts (carried by a V codeword) and private parts
(carried by U1, U2 codewords superposed on V). The encoder searches for a jointly
typical (U1, U2) pair; decoder 1 decodes (public, private-1) and forwards the
bin of the V codeword to decoder 2, which decodes within that bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..probability import Alphabet, InfoCalc, JointPmf, compose, marginalize
from ..regions import ChannelSpec
from .common import (
    SYMBOL_BUDGET,
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
from .decode import covering_search
from .wak import conditional_rows

SPLIT_NAMES = ("R10", "R11", "R20", "R22", "R1p", "R2p")
BC_STAGES = ("cover", "dec1", "dec2")


def bc_joint(ch: ChannelSpec, aux3: JointPmf) -> JointPmf:
    """(V, U1, U2, X, Y1, Y2) from a PMF over (V, U1, U2, X)."""
    if sorted(aux3.names) != ["U1", "U2", "V", "X"]:
        raise SimConfigError("auxiliary must be a PMF over V, U1, U2, X")
    aux3 = aux3.reorder(("V", "U1", "U2", "X"))
    if aux3.axis("X").size != ch.x_alphabet.size:
        raise SimConfigError("auxiliary X alphabet differs from the channel")
    return compose(compose(aux3, ch.y1_conditional()), ch.noisy)


def deterministic_output_aux(ch: ChannelSpec, p_x: JointPmf) -> JointPmf:
    """Constant V with U1 = Y1 and U2 = Y2 for a channel whose outputs are both functions of X."""
    if not ch.is_deterministic():
        raise SimConfigError("both outputs must be deterministic")
    f2 = ch.noisy.rows().argmax(axis=1)
    nx = ch.x_alphabet.size
    n1, n2 = ch.y1_alphabet.size, ch.y2_alphabet.size
    vals = np.zeros((1, n1, n2, nx))
    vals[0, ch.f, f2, np.arange(nx)] = p_x.values.reshape(-1)
    return JointPmf([Alphabet("V", 1), Alphabet("U1", n1), Alphabet("U2", n2), ch.x_alphabet], vals)


@dataclass(frozen=True)
class SchemeTerms:
    i_u1u2_v: float
    i_u1y1_v: float
    i_vu1_y1: float
    i_u2y2_v: float
    i_vu2_y2: float

    @classmethod
    def of(cls, p: JointPmf) -> "SchemeTerms":
        m = InfoCalc(p)
        return cls(m.I("U1", "U2", "V"), m.I("U1", "Y1", "V"), m.I(("V", "U1"), "Y1"),
                   m.I("U2", "Y2", "V"), m.I(("V", "U2"), "Y2"))

    def inner_bounds(self, r12: float) -> tuple[float, float, float]:
        """(R1 max, R2 max, sum max) after eliminating the split rates."""
        s = min(self.i_vu1_y1 + self.i_u2y2_v - self.i_u1u2_v,
                self.i_u1y1_v + self.i_vu2_y2 - self.i_u1u2_v + r12)
        return self.i_vu1_y1, self.i_vu2_y2 + r12, s

    def slacks(self, r: dict[str, float], r12: float) -> dict[str, float]:
        r1, r2 = r["R10"] + r["R11"], r["R20"] + r["R22"]
        return {
            "R1'+R2' > I(U1;U2|V)": r["R1p"] + r["R2p"] - self.i_u1u2_v,
            "R11+R1' < I(U1;Y1|V)": self.i_u1y1_v - r["R11"] - r["R1p"],
            "R20+R1+R1' < I(V,U1;Y1)": self.i_vu1_y1 - r["R20"] - r1 - r["R1p"],
            "R22+R2' < I(U2;Y2|V)": self.i_u2y2_v - r["R22"] - r["R2p"],
            "R10+R2+R2'-R12 < I(V,U2;Y2)": self.i_vu2_y2 - r["R10"] - r2 - r["R2p"] + r12,
        }


def target_rates(terms: SchemeTerms, r12: float, theta: float) -> tuple[float, float]:
    """theta times the R1-maximal corner of the inner-bound polygon."""
    a, b, c = terms.inner_bounds(r12)
    r1 = max(0.0, min(a, c))
    r2 = max(0.0, min(b, c - r1))
    return theta * r1, theta * r2


def split_rates(terms: SchemeTerms, r1: float, r2: float, r12: float) -> tuple[dict[str, float], float]:
    """Split rates with the largest common slack, then the smallest codebooks at that slack.

    Returns the split and the slack; a slack <= 0 means the target is not strictly inside.
    """
    # variables: R10 R11 R20 R22 R1p R2p s
    a_eq = [[1, 1, 0, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0, 0]]
    b_eq = [r1, r2]
    a_ub = [
        [0, 0, 0, 0, -1, -1, 1],
        [0, 1, 0, 0, 1, 0, 1],
        [0, 0, 1, 0, 1, 0, 1],
        [0, 0, 0, 1, 0, 1, 1],
        [1, 0, 0, 0, 0, 1, 1],
    ]
    b_ub = [-terms.i_u1u2_v, terms.i_u1y1_v, terms.i_vu1_y1 - r1, terms.i_u2y2_v, terms.i_vu2_y2 - r2 + r12]
    bounds = [(0, None)] * 6 + [(None, 10.0)]
    first = linprog([0, 0, 0, 0, 0, 0, -1], A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                    method="highs")
    if first.status != 0:
        raise SimConfigError(f"split-rate LP failed: {first.message}")
    s_star = float(first.x[6])
    keep = s_star - 1e-3 * abs(s_star) if s_star > 0 else s_star
    second = linprog([1, 1, 1, 1, 1, 1, 0], A_ub=a_ub + [[0, 0, 0, 0, 0, 0, -1]], b_ub=b_ub + [-keep],
                     A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    x = second.x if second.status == 0 else first.x
    split = {k: max(0.0, float(v)) for k, v in zip(SPLIT_NAMES, x[:6])}
    return split, s_star


@dataclass
class BcCodebookSet:
    n: int
    rates: dict
    m10: int
    m20: int
    m11: int
    m22: int
    i1: int
    i2: int
    c_v: np.ndarray    # [M0, n], row m0 = m10 * M20 + m20
    v_bins: np.ndarray  # [M0]
    c_u1: np.ndarray   # [M0, M11 * I1, n], column m11 * I1 + i1
    c_u2: np.ndarray   # [M0, M22 * I2, n]
    seed: int

    @property
    def m0(self) -> int:
        return self.m10 * self.m20


def build_bc_codebooks(p: JointPmf, rates: dict[str, float], cfg: SimConfig) -> BcCodebookSet:
    n, cap = cfg.n, cfg.codebook_cap
    m10, m20 = codebook_size(rates["R10"], n), codebook_size(rates["R20"], n)
    m11, m22 = codebook_size(rates["R11"], n), codebook_size(rates["R22"], n)
    i1, i2 = codebook_size(rates["R1p"], n), codebook_size(rates["R2p"], n)
    m0 = m10 * m20
    check_size("C_V", m0, cap)
    check_size("C_U1(m0)", m11 * i1, cap)
    check_size("C_U2(m0)", m22 * i2, cap)
    total = m0 * (1 + m11 * i1 + m22 * i2) * n
    if total > SYMBOL_BUDGET:
        raise SimConfigError(f"codebooks need {total} stored symbols, above the budget {SYMBOL_BUDGET}")
    c_v = draw_iid(codebook_rng(cfg.seed, 0), marginalize(p, ("V",)).values, (m0, n))
    v_bins = permutation_bins(codebook_rng(cfg.seed, 1), m0, codebook_size(rates["R12"], n))
    rows1 = conditional_rows(p, ("U1",), ("V",))
    rows2 = conditional_rows(p, ("U2",), ("V",))
    c_u1 = draw_conditional(codebook_rng(cfg.seed, 2), rows1, np.broadcast_to(c_v[:, None, :], (m0, m11 * i1, n)))
    c_u2 = draw_conditional(codebook_rng(cfg.seed, 3), rows2, np.broadcast_to(c_v[:, None, :], (m0, m22 * i2, n)))
    return BcCodebookSet(n, dict(rates), m10, m20, m11, m22, i1, i2, c_v, v_bins, c_u1, c_u2, cfg.seed)


def bc_plan(ch: ChannelSpec, aux3: JointPmf, cfg: SimConfig) -> tuple[JointPmf, dict[str, float]]:
    """Joint PMF and the full rate dictionary the simulation will use."""
    p = bc_joint(ch, aux3)
    terms = SchemeTerms.of(p)
    r12 = cfg.r12 if cfg.r12 is not None else 0.0
    if cfg.rates is not None:
        rates = {k: float(v) for k, v in cfg.rates.items()}
        missing = set(SPLIT_NAMES) - set(rates)
        if missing:
            raise SimConfigError(f"explicit rates must define {sorted(missing)}")
        rates.setdefault("R12", r12)
        r12 = rates["R12"]
        if min(rates.values()) < 0:
            raise SimConfigError("rates must be nonnegative")
    else:
        r1, r2 = target_rates(terms, r12, cfg.theta)
        split, _ = split_rates(terms, r1, r2, r12)
        rates = dict(split, R12=r12)
    viol = [k for k, s in terms.slacks(rates, r12).items() if s < -1e-12]
    if viol and not cfg.allow_infeasible:
        raise SimConfigError("split rates violate: " + ", ".join(viol))
    return p, rates


def simulate_bc(ch: ChannelSpec, aux3: JointPmf, cfg: SimConfig) -> TrialReport:
    p, rates = bc_plan(ch, aux3, cfg)
    cb = build_bc_codebooks(p, rates, cfg)
    n, eps = cfg.n, cfg.eps
    nv, nu1, nu2 = (p.axis(a).size for a in ("V", "U1", "U2"))
    ref_cover = TypicalityRef(p, ("V", "U1", "U2"), n, eps)
    ref_vy1 = TypicalityRef(p, ("V", "Y1"), n, eps)
    ref_d1 = TypicalityRef(p, ("V", "U1", "Y1"), n, eps)
    ref_d2 = TypicalityRef(p, ("V", "U2", "Y2"), n, eps)
    x_rows = conditional_rows(p, ("X",), ("V", "U1", "U2"))
    y2_rows = ch.noisy.rows()
    cover_target = marginalize(p, ("V", "U1", "U2", "X")).reorder(("V", "U1", "U2", "X")).values
    v_order = np.argsort(cb.v_bins, kind="stable")
    v_starts = np.searchsorted(cb.v_bins[v_order], np.arange(int(cb.v_bins.max()) + 2))
    single1 = cb.m0 * cb.m11 == 1

    stages = dict.fromkeys(BC_STAGES, 0)
    err_all = err1 = err2 = 0
    tvs = np.empty(cfg.trials)
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        m10, m20 = int(rng.integers(cb.m10)), int(rng.integers(cb.m20))
        m11, m22 = int(rng.integers(cb.m11)), int(rng.integers(cb.m22))
        m0 = m10 * cb.m20 + m20
        v = cb.c_v[m0]
        blk1 = cb.c_u1[m0, m11 * cb.i1:(m11 + 1) * cb.i1]
        blk2 = cb.c_u2[m0, m22 * cb.i2:(m22 + 1) * cb.i2]
        cov = covering_search(ref_cover.pair([v[None, :], blk1], blk2), rng)
        stages["cover"] += not cov.found
        u1, u2 = blk1[cov.pair[0]], blk2[cov.pair[1]]
        x = draw_conditional(rng, x_rows, (v * nu1 + u1) * nu2 + u2)
        y1 = ch.f[x]
        y2 = draw_conditional(rng, y2_rows, x)
        tvs[t] = empirical_tv(cover_target, v, u1, u2, x)

        # decoder 1: unique (m0, m11) over the whole codebook
        if single1:
            ok1, m0_hat, m11_hat = True, 0, 0
        else:
            cand = np.flatnonzero(ref_vy1.mask(cb.c_v, y1[None, :]))
            hits = np.argwhere(ref_d1.mask(cb.c_v[cand][:, None, :], cb.c_u1[cand], y1[None, None, :]))
            pairs = sorted({(int(cand[a]), int(b) // cb.i1) for a, b in hits})
            ok1 = len(pairs) == 1
            if pairs:
                m0_hat, m11_hat = pairs[0]
            else:
                m0_hat, m11_hat = (int(cand[0]) if cand.size else 0), 0
        bad1 = not ok1 or (m0_hat // cb.m20, m11_hat) != (m10, m11)

        # decoder 2: unique (m0, m22) inside the forwarded bin
        m12 = int(cb.v_bins[m0_hat])
        members = v_order[v_starts[m12]:v_starts[m12 + 1]]
        if members.size * cb.m22 == 1:
            ok2, m0_dd, m22_dd = True, int(members[0]), 0
        else:
            hits = np.argwhere(ref_d2.mask(cb.c_v[members][:, None, :], cb.c_u2[members], y2[None, None, :]))
            pairs = sorted({(int(members[a]), int(b) // cb.i2) for a, b in hits})
            ok2 = len(pairs) == 1
            m0_dd, m22_dd = pairs[0] if pairs else (int(members[0]), 0)
        bad2 = not ok2 or (m0_dd % cb.m20, m22_dd) != (m20, m22)

        stages["dec1"] += bad1
        stages["dec2"] += bad2
        err1 += bad1
        err2 += bad2
        err_all += bad1 or bad2

    return TrialReport("bc", n, float(cfg.theta), cfg.seed, cfg.trials, int(err_all), int(err1), int(err2),
                       float(tvs.mean()), float(tvs.std()), {k: int(v) for k, v in stages.items()},
                       {k: float(v) for k, v in sorted(rates.items())})
