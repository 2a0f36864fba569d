"""End-to-end acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult`; a criterion passes only when its
numeric conditions hold and it finishes inside its time budget.
"""

from __future__ import annotations

import contextlib
import io
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import data_path
from .codingsim import SimConfig, deterministic_output_aux, simulate_bc, simulate_wak_corner1
from .entropyspace import (
    feasible_witnesses,
    fme_eliminate_all,
    parse_system,
    remove_redundant,
    specialize_u1_y1,
    systems_equal,
)
from .markovgraph import (
    d_separation_check,
    factorization_from_fdg,
    instantiate_factors,
    instantiate_fdg,
    soundness_crosscheck,
    undirected_markov_check,
)
from .probability import Alphabet, ConditionalPmf, InfoCalc, JointPmf, binary_entropy, marginalize
from .regions import (
    BcAux,
    ChannelSpec,
    SourceSpec,
    WakAux,
    bc_alt_bounds,
    bc_aux_from_tables,
    bc_bounds,
    compose_bc,
    compose_wak,
    converse_inclusion,
    dbc_bounds,
    duality_check_joint,
    frontier,
    mix_auxiliary_gap,
    pdbc_bounds,
    pdbc_from_capacity_region,
    pdbc_two_bound,
    polygon_vertices,
    RatePoint,
    rbc_joint,
    rbc_reduced_bounds,
    sw_lambda,
)
from .specfile import channel_from_doc, graph_from_doc, read_spec, source_from_doc, wak_aux_from_doc

RESID = 1e-9

# Simulation settings for the trend criterion; see the README for how they were chosen.
TREND_NS = (8, 12, 16, 20)
TREND_TRIALS = 2000
TREND_SEED = 1
WAK_EPS = 0.9
BC_EPS = 0.5


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number:2d}] {self.title}: {self.detail} ({self.seconds:.2f}s of {self.budget:g}s)"


def _timed(number: int, title: str, budget: float, body: Callable[[], tuple[bool, str]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, detail = body()
    dt = time.perf_counter() - t0
    if dt >= budget:
        detail += "; over the time budget"
    return CriterionResult(number, title, bool(ok) and dt < budget, detail, dt, budget)


def _binary_source(rng: np.random.Generator, ny: int = 2) -> SourceSpec:
    X1, X2 = Alphabet("X1", 2), Alphabet("X2", 2)
    f = [0, 1] if ny == 2 else [0, 1] + [int(rng.integers(2)) for _ in range(ny - 2)]
    return SourceSpec(JointPmf([X1, X2], rng.dirichlet([0.7] * 4).reshape(2, 2)), f, Alphabet("Y", ny))


def _random_wak_aux(rng: np.random.Generator, src: SourceSpec, nv: int = 2, nu: int = 2) -> WakAux:
    ny = src.y_alphabet.size
    pv = rng.dirichlet([0.5] * nv, size=2)
    pu = rng.dirichlet([0.5] * nu, size=(2, nv))
    py = np.zeros((2, nu, nv, ny))
    for x1 in range(2):
        pre = np.flatnonzero(src.f == x1)
        py[x1][..., pre] = rng.dirichlet([0.7] * len(pre), size=(nu, nv))
    return WakAux.from_arrays(src, pv, pu, py)


# --- 1 -------------------------------------------------------------------------------

def information_identities(count: int = 200, seed: int = 11) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        worst = {"chain": 0.0, "cmi_min": 0.0, "identity_v": 0.0, "identity_u": 0.0}
        for _ in range(count):
            src = _binary_source(rng)
            p = compose_wak(src, _random_wak_aux(rng, src))
            m = InfoCalc(p)
            order = ("X1", "X2", "V", "U", "Y")
            chain = sum(m.H(order[k], order[:k]) for k in range(len(order)))
            worst["chain"] = max(worst["chain"], abs(chain - m.H(order)))
            split = m.I("V", "X1") + m.I("V", ("X2", "U"), "X1")
            worst["chain"] = max(worst["chain"], abs(split - m.I("V", ("X1", "X2", "U"))))
            for a, b, c in (("V", "X2", "X1"), ("U", "X1", ("X2", "V")), ("X1", "X2", "Y"), ("U", "Y", "V")):
                worst["cmi_min"] = min(worst["cmi_min"], m.I(a, b, c))
            rep = duality_check_joint(p)
            worst["identity_v"] = max(worst["identity_v"], rep.identity_v)
            worst["identity_u"] = max(worst["identity_u"], rep.identity_u)
        ok = worst["chain"] < RESID and worst["cmi_min"] >= 0 and max(worst["identity_v"], worst["identity_u"]) < RESID
        return ok, f"{count} auxiliaries; " + ", ".join(f"{k}={v:.2e}" for k, v in worst.items())

    return _timed(1, "information identities", 10.0, body)


# --- 2 -------------------------------------------------------------------------------

def fme_reproduction(witnesses: int = 40, seed: int = 0) -> CriterionResult:
    def body():
        split = parse_system(data_path("marton_split.sys").read_text())
        inner = parse_system(data_path("marton_inner.sys").read_text())
        capacity = parse_system(data_path("sdbc_capacity.sys").read_text())
        keep = ("R12", "R1", "R2")
        out = fme_eliminate_all(split, [v for v in split.vars if v not in keep])
        out = remove_redundant(out, feasible_witnesses(split, np.random.default_rng(seed), witnesses))
        same_inner = systems_equal(out, inner)
        same_cap = systems_equal(specialize_u1_y1(out), capacity)
        return same_inner and same_cap, (f"{len(out.rate_ineqs())} rate bounds; inner bound "
                                         f"{'matches' if same_inner else 'differs'}; U1=Y1 specialization "
                                         f"{'matches' if same_cap else 'differs'}")

    return _timed(2, "FME projection", 1.0, body)


# --- 3 -------------------------------------------------------------------------------

def _binary_sd_channel(rng: np.random.Generator) -> ChannelSpec:
    X = Alphabet("X", 2)
    f = rng.integers(0, 2, size=2)
    return ChannelSpec(X, f, ConditionalPmf([Alphabet("Y2", 2)], [X], rng.dirichlet([0.6, 0.6], size=2)))


def alternative_form_equivalence(count: int = 150, seed: int = 3) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        fails_a = fails_b = mixes = 0
        worst48 = 0.0
        for _ in range(count):
            ch = _binary_sd_channel(rng)
            aux = bc_aux_from_tables(ch, rng.dirichlet([1, 1]), rng.dirichlet([0.4, 0.4], 2),
                                     rng.dirichlet([0.4, 0.4], (2, 2)))
            alt = bc_alt_bounds(ch, aux)
            base = max(alt.lo_r12, 0.0)
            for r12 in (base, base + 0.1, base + 0.5):
                std = bc_bounds(ch, aux, r12)
                for r1, r2 in polygon_vertices(alt.r1_max, alt.r2_max(r12), alt.sum_max):
                    fails_a += not std.contains(RatePoint(r12, r1, r2))
            gap = alt.lo_r12
            if gap <= 1e-6:
                continue
            for frac in (0.0, 0.3, 0.7):
                r12 = gap * frac
                new = mix_auxiliary_gap(aux, ch, r12)
                mixes += 1
                m = InfoCalc(compose_bc(ch, new))
                worst48 = max(worst48, abs(m.I("V", "Y1") - m.I("V", "Y2") - r12))
                alt_new = bc_alt_bounds(ch, new)
                fails_b += sum(bool(alt_new.failing(v)) for v in bc_bounds(ch, aux, r12).vertices())
        ok = fails_a == 0 and fails_b == 0 and worst48 < RESID and mixes > 0
        return ok, (f"{count} channel/aux draws; direction 1 failures={fails_a}; {mixes} mixes, "
                    f"direction 2 failures={fails_b}, gap residual={worst48:.2e}")

    return _timed(3, "alternative characterization", 60.0, body)


# --- 4 -------------------------------------------------------------------------------

def converse_construction(count: int = 300, seed: int = 5) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        X = Alphabet("X", 3)
        ch = ChannelSpec(X, [0, 0, 1], ConditionalPmf([Alphabet("Y2", 2)], [X], [[0.9, 0.1], [0.1, 0.9], [0.1, 0.9]]))
        A, B, C = Alphabet("A", 2), Alphabet("B", 2), Alphabet("C", 2)
        branches: dict[str, int] = {}
        bad = checked = 0
        lam_ok = True
        for _ in range(count):
            abcx = JointPmf([A, B, C, X], rng.dirichlet([0.3] * 24).reshape(2, 2, 2, 3))
            rep = converse_inclusion(abcx, ch, np.linspace(0, 1.5, 7))
            branches[rep.param.branch] = branches.get(rep.param.branch, 0) + 1
            lam_ok &= 0 <= rep.param.lam <= 1
            bad += len(rep.violations)
            checked += rep.checked
        need = ("nonpositive_gap", "min_clause", "formula")
        ok = lam_ok and bad == 0 and all(branches.get(b, 0) >= 10 for b in need)
        tally = ", ".join(f"{k}={branches[k]}" for k in sorted(branches))
        return ok, f"{count} joints, {checked} vertices, violations={bad}; branches {tally}"

    return _timed(4, "converse construction", 60.0, body)


# --- 5 -------------------------------------------------------------------------------

def corner_duality(count: int = 150, seed: int = 7) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        worst, markov_bad = 0.0, 0
        for k in range(count):
            src = _binary_source(rng, ny=2 + k % 2)
            rep = duality_check_joint(compose_wak(src, _random_wak_aux(rng, src, 2, 2 + k % 2)))
            worst = max(worst, rep.corner_residual)
            markov_bad += not rep.markov_ok
        return worst < RESID and markov_bad == 0, f"{count} PMFs; max corner residual={worst:.2e}"

    return _timed(5, "corner-point duality", 30.0, body)


# --- 6 -------------------------------------------------------------------------------

def _pd_grid(step: float) -> list[JointPmf]:
    U, X = Alphabet("U", 2), Alphabet("X", 2)
    ticks = np.round(np.arange(0, 1 + step / 2, step), 12)
    out = []
    for px in ticks:
        for a in ticks:
            for b in ticks:
                vals = np.array([[(1 - px) * (1 - a), px * (1 - b)], [(1 - px) * a, px * b]])
                out.append(JointPmf([U, X], vals))
    return out


def special_cases() -> CriterionResult:
    def body():
        notes, ok = [], True
        ch = channel_from_doc(read_spec(data_path("blackwell.ch")))
        h = binary_entropy(1 / 3)
        dbc_res = 0.0
        for r12 in (0.0, 0.25, 0.6):
            got = dbc_bounds(ch, ch.p_x, r12).as_tuple()
            dbc_res = max(dbc_res, max(abs(a - b) for a, b in zip(got, (h, h + r12, np.log2(3)))))
        ok &= dbc_res < RESID
        notes.append(f"dbc residual={dbc_res:.1e}")

        sw_res = 0.0
        for name in ("dsbs_p010.src", "dsbs_p025.src"):
            src = source_from_doc(read_spec(data_path(name)))
            hx = InfoCalc(src.joint).H("X1", "X2")
            for g in np.linspace(0, hx, 20):
                sw_res = max(sw_res, sw_lambda(src, float(g)).residual)
        ok &= sw_res < RESID
        notes.append(f"sw residual={sw_res:.1e} over 2x20 gammas")

        X = Alphabet("X", 2)
        pd = ChannelSpec(X, [0, 1], ConditionalPmf([Alphabet("Y2", 2)], [X], [[0.8, 0.2], [0.2, 0.8]]))
        uxs = _pd_grid(0.1)
        r1_grid = np.linspace(0, 1, 41)
        gap = cap_gap = 0.0
        for r12 in (0.0, 0.2):
            three = frontier([pdbc_bounds(pd, u, r12).as_tuple() for u in uxs], r1_grid)
            two = frontier([pdbc_two_bound(pd, u, r12).as_tuple() for u in uxs], r1_grid)
            cap = frontier([_bc_triplet(pdbc_from_capacity_region(pd, u, r12)) for u in uxs], r1_grid)
            gap = max(gap, float(np.max(np.abs(two - three))))
            cap_gap = max(cap_gap, float(np.max(np.abs(cap - three))))
        ok &= gap < RESID
        notes.append(f"pd two-bound vs three-bound frontier gap={gap:.3g} "
                     f"(capacity specialization vs three-bound gap={cap_gap:.2e})")
        return ok, "; ".join(notes)

    return _timed(6, "special cases", 30.0, body)


def _bc_triplet(b) -> tuple[float, float, float]:
    return (b.r1_max, b.r2_max, b.sum_max)


# --- 7 -------------------------------------------------------------------------------

def rbc_reduction(count: int = 120, seed: int = 13) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        X = Alphabet("X", 3)
        worst = 0.0
        for k in range(count):
            ch = ChannelSpec(X, rng.integers(0, 2, 3), ConditionalPmf([Alphabet("Y2", 2)], [X],
                                                                        rng.dirichlet([0.8, 0.8], 3)))
            nu = 2 + k % 2
            vux = JointPmf([Alphabet("V", 2), Alphabet("U", nu), X], rng.dirichlet([0.5] * (6 * nu)).reshape(2, nu, 3))
            m1 = 2 + k % 3
            px1 = JointPmf([Alphabet("X1", m1)], rng.dirichlet([1.0] * m1))
            fmap = np.arange(m1) % 2 if k % 2 else np.arange(m1)
            joint = rbc_joint(vux, ch, px1, fmap, int(fmap.max()) + 1)
            r12 = InfoCalc(joint).H("Y22")
            red = rbc_reduced_bounds(joint).as_tuple()
            ref = bc_bounds(ch, BcAux.from_vux(vux, ch), r12).as_tuple()
            worst = max(worst, max(abs(a - b) for a, b in zip(red, ref)))
        return worst < RESID, f"{count} factored joints; max residual={worst:.2e}"

    return _timed(7, "relay-cooperation reduction", 30.0, body)


# --- 8 -------------------------------------------------------------------------------

def _not_rising(intervals: list[tuple[float, float]]) -> bool:
    return all(nxt[0] <= prev[1] for prev, nxt in zip(intervals, intervals[1:]))


def simulation_trends(trials: int = TREND_TRIALS, ns=TREND_NS) -> CriterionResult:
    def body():
        src = source_from_doc(read_spec(data_path("dsbs_p010_y4.src")))
        aux = wak_aux_from_doc(read_spec(data_path("bsc_pair.wak")), src)
        ch = channel_from_doc(read_spec(data_path("blackwell.ch")))
        aux3 = deterministic_output_aux(ch, ch.p_x)
        wak = [simulate_wak_corner1(src, aux, SimConfig(n=n, trials=trials, eps=WAK_EPS, seed=TREND_SEED)) for n in ns]
        bc = [simulate_bc(ch, aux3, SimConfig(n=n, trials=trials, eps=BC_EPS, seed=TREND_SEED)) for n in ns]
        checks = {
            "wak error": _not_rising([r.wilson("overall") for r in wak]),
            "wak tv": _not_rising([r.tv_interval() for r in wak]) and wak[-1].mean_tv < wak[0].mean_tv,
            "bc error1": _not_rising([r.wilson("dec1") for r in bc]),
            "bc error2": _not_rising([r.wilson("dec2") for r in bc]),
        }
        hi_wak = simulate_wak_corner1(src, aux, SimConfig(n=16, trials=trials // 4, eps=WAK_EPS, seed=TREND_SEED,
                                                          theta=2.0, allow_infeasible=True))
        # the uniform input needs ~7e8 codewords at twice the bounds; a skewed input keeps codebooks small
        skew = ChannelSpec(ch.x_alphabet, ch.f, ch.noisy, ch.y1_alphabet, JointPmf([ch.x_alphabet], [0.9, 0.05, 0.05]))
        hi_bc = simulate_bc(skew, deterministic_output_aux(skew, skew.p_x), SimConfig(n=16, trials=trials // 4, eps=BC_EPS, seed=TREND_SEED,
                                                theta=2.0, allow_infeasible=True))
        checks["2x wak"] = hi_wak.error_rate_overall > 0.9
        checks["2x bc"] = hi_bc.error_rate_overall > 0.9
        fmt = lambda xs: "/".join(f"{x:.3f}" for x in xs)  # noqa: E731
        detail = (f"wak err {fmt(r.error_rate_overall for r in wak)}, tv {fmt(r.mean_tv for r in wak)}; "
                  f"bc err1 {fmt(r.error_rate_dec1 for r in bc)}, err2 {fmt(r.error_rate_dec2 for r in bc)}; "
                  f"2x rates err wak={hi_wak.error_rate_overall:.3f} bc={hi_bc.error_rate_overall:.3f}")
        failed = [k for k, v in checks.items() if not v]
        if failed:
            detail += "; failed: " + ", ".join(failed)
        return not failed, detail

    return _timed(8, "simulation trends", 600.0, body)


# --- 9 -------------------------------------------------------------------------------

def markov_suite(count: int = 50, seed: int = 17) -> CriterionResult:
    def body():
        block = graph_from_doc(read_spec(data_path("block.fdg")))
        collider = graph_from_doc(read_spec(data_path("collider.fdg")))
        g, q = block.fdg, block.query
        spec = block.factors or factorization_from_fdg(g)
        und, dsep = undirected_markov_check(spec, q), d_separation_check(g, q)
        r1 = soundness_crosscheck(q, dsep, lambda rng: instantiate_fdg(g, rng), count, seed)
        r2 = soundness_crosscheck(q, und, lambda rng: instantiate_factors(spec, rng), count, seed)
        cg, cq = collider.fdg, collider.query
        col_d = d_separation_check(cg, cq)
        col_u = undirected_markov_check(factorization_from_fdg(cg), cq)
        ok = und and dsep and r1.sound and r2.sound and r1.instantiations >= 50 and not col_d and not col_u
        return ok, (f"block: undirected={und}, dsep={dsep}; crosscheck {r1.instantiations}+{r2.instantiations} "
                    f"instantiations, violations={r1.violations + r2.violations}, max CMI="
                    f"{max(r1.max_cmi, r2.max_cmi):.1e}; collider: dsep={col_d}, undirected={col_u}")

    return _timed(9, "Markov verification", 30.0, body)


# --- 10 ------------------------------------------------------------------------------

def _cli_runs(tmp: Path) -> list[tuple[str, list[str], list[Path]]]:
    d = lambda name: str(data_path(name))  # noqa: E731
    out = lambda name: tmp / name  # noqa: E731
    return [
        ("region", ["region", d("dsbs_p010.src"), "--region", "wak", "--grid-step", "0.5", "--out", str(out("w.csv"))],
         [out("w.csv")]),
        ("region-bc", ["region", d("blackwell.ch"), "--region", "bc", "--cards", "2,2", "--random", "20",
                       "--r12-grid", "0,0.3", "--out", str(out("b.csv"))], [out("b.csv")]),
        ("duality", ["duality", d("dsbs_p010_y4.src"), d("bsc_pair.wak"), "--out", str(out("d.txt"))], [out("d.txt")]),
        ("fme", ["fme", d("marton_split.sys"), "--eliminate", "R10,R11,R20,R22,R1',R2'", "--out",
                 str(out("f.sys"))], [out("f.sys")]),
        ("simulate", ["simulate", d("dsbs_p010_y4.src"), d("bsc_pair.wak"), "--scheme", "wak1", "--n-sweep", "8,10",
                      "--trials", "40", "--eps", "0.9", "--seed", "3", "--out", str(out("s.csv")),
                      "--stages-out", str(out("s_stages.csv"))], [out("s.csv"), out("s_stages.csv")]),
        ("markov", ["markov", d("block.fdg"), "--crosscheck", "5", "--dot", str(out("g.dot")), "--out",
                    str(out("m.txt"))], [out("m.txt"), out("g.dot")]),
    ]


def reproducibility() -> CriterionResult:
    from .cli import main

    def body():
        with tempfile.TemporaryDirectory() as tmp:
            runs = _cli_runs(Path(tmp))
            differing = []
            for name, argv, files in runs:
                snaps = []
                for _ in range(2):
                    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
                        code = main(argv)
                    paths = files + [files[0].with_name(files[0].name + ".manifest")]
                    snaps.append((code, [p.read_bytes() for p in paths]))
                if snaps[0] != snaps[1] or snaps[0][0] != 0:
                    differing.append(name)
        detail = f"{len(runs)} commands rerun"
        if differing:
            detail += "; differing or failing: " + ", ".join(differing)
        return not differing, detail

    return _timed(10, "reproducibility", 120.0, body)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: information_identities,
    2: fme_reproduction,
    3: alternative_form_equivalence,
    4: converse_construction,
    5: corner_duality,
    6: special_cases,
    7: rbc_reduction,
    8: simulation_trends,
    9: markov_suite,
    10: reproducibility,
}


def run_all(only=None, quick: bool = False) -> list[CriterionResult]:
    out = []
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        out.append(fn(trials=200) if quick and k == 8 else fn())
    return out
