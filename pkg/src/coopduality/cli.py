"""Command-line front end.

Exit codes: 0 success, 1 a requested check failed, 2 a spec file did not parse,
3 the configuration is infeasible (rates, codebook sizes, search size).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import platform
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .codingsim import (
    SimConfig,
    SimConfigError,
    backend_name,
    deterministic_output_aux,
    reports_to_csv,
    simulate_bc,
    simulate_wak_corner1,
    simulate_wak_corner2,
    stages_to_long_csv,
)
from .entropyspace import (
    SystemError_,
    fme_eliminate_all,
    format_system,
    remove_redundant,
    feasible_witnesses,
    systems_equal,
)
from .markovgraph import (
    GraphError,
    MarkovQuery,
    d_separation_check,
    factorization_from_fdg,
    instantiate_factors,
    instantiate_fdg,
    soundness_crosscheck,
    undirected_markov_check,
)
from .probability import Alphabet, JointPmf, PmfError, binary_entropy, marginalize
from .regions import (
    RegionError,
    SearchSpec,
    bc_alt_bounds,
    compose_bc,
    dbc_bounds,
    duality_check_joint,
    compose_wak,
    pdbc_bounds,
    pdbc_two_bound,
    rbc_joint,
    rbc_reduced_bounds,
    sample_bc_region,
    sample_wak_region,
    sw_bounds,
)
from .specfile import (
    SpecDoc,
    SpecParseError,
    bc_aux_from_doc,
    channel_from_doc,
    graph_from_doc,
    read_spec,
    source_from_doc,
    wak_aux_from_doc,
)

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_INFEASIBLE = 0, 1, 2, 3
REGION_COLUMNS = ("region", "aux_id", "record", "r12", "r1", "r2", "r_sum", "r_sum_b")
REGIONS = ("wak", "bc", "bc-alt", "dbc", "sw", "pdbc", "rbc")


class CliError(Exception):
    def __init__(self, code: int, msg: str) -> None:
        super().__init__(msg)
        self.code = code


# --- helpers -------------------------------------------------------------------------

def _floats(text: str, label: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_INFEASIBLE, f"{label}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise CliError(EXIT_INFEASIBLE, f"{label}: empty list")
    return vals


def _ints(text: str, label: str) -> list[int]:
    vals = _floats(text, label)
    if any(v != int(v) for v in vals):
        raise CliError(EXIT_INFEASIBLE, f"{label}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _load(path: str, kind: str) -> SpecDoc:
    try:
        doc = read_spec(path)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc.strerror}") from None
    except SpecParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None
    if doc.kind != kind:
        raise CliError(EXIT_PARSE, f"{path}: expected a {kind} file, got {doc.kind}")
    return doc


def _typed(path: str, fn: Callable, *extra):
    try:
        return fn(*extra)
    except SpecParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


def _specs(args, kinds: Sequence[str]) -> list[SpecDoc]:
    if len(args.specs) < len(kinds):
        raise CliError(EXIT_PARSE, f"expected spec files of kind {', '.join(kinds)}")
    return [_load(p, k) for p, k in zip(args.specs, kinds)]


def _r(x: float) -> str:
    return repr(float(x))


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (_r(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _versions() -> dict[str, str]:
    import numba
    import scipy

    return {"coopduality": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def manifest_text(command: str, args: argparse.Namespace, inputs: Sequence[str],
                  outputs: dict[str, str]) -> str:
    """Flat key=value manifest; every value is a deterministic function of the run."""
    lines = [f"command={command}"]
    for key in sorted(vars(args)):
        if key in ("func", "specs", "command"):
            continue
        val = getattr(args, key)
        lines.append(f"flag.{key}={'' if val is None else val}")
    for k, v in _versions().items():
        lines.append(f"version.{k}={v}")
    lines.append(f"backend={backend_name()}")
    for i, path in enumerate(inputs):
        lines.append(f"input.{i}.path={path}")
        lines.append(f"input.{i}.sha256={_sha256(Path(path).read_bytes())}")
    for name, text in outputs.items():
        lines.append(f"output.{name}.sha256={_sha256(text.encode())}")
    return "\n".join(lines) + "\n"


def _emit(args, command: str, text: str, inputs: Sequence[str], extra: dict[str, tuple[str, str]] | None = None):
    """Write the primary output (file or stdout), side outputs and the manifest."""
    outputs = {"main": text}
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for name, (path, body) in (extra or {}).items():
        Path(path).write_text(body, encoding="utf-8")
        outputs[name] = body
    if args.out:
        Path(args.out + ".manifest").write_text(manifest_text(command, args, inputs, outputs), encoding="utf-8")


# --- region ----------------------------------------------------------------------------

def _search(args) -> SearchSpec:
    if args.random:
        return SearchSpec(step=None, random_count=args.random, seed=args.seed)
    return SearchSpec(step=args.grid_step, seed=args.seed)


def _binary_with_entropy(h: float) -> JointPmf:
    if h <= 0:
        q = 0.0
    elif h >= 1:
        q = 0.5
    else:
        q = brentq(lambda x: binary_entropy(x) - h, 1e-300, 0.5, xtol=1e-15)
    return JointPmf([Alphabet("X1", 2)], [1 - q, q])


def _region_rows(args, docs: list[SpecDoc]) -> list[tuple]:
    kind = args.region
    cards = _ints(args.cards, "--cards")
    if len(cards) != 2:
        raise CliError(EXIT_INFEASIBLE, "--cards takes two integers: |V|,|U|")
    grid = _floats(args.r12_grid, "--r12-grid")
    rows: list[tuple] = []
    if kind in ("wak", "sw"):
        src = _typed(args.specs[0], source_from_doc, docs[0])
        if kind == "sw":
            for r12 in grid:
                b = sw_bounds(src, r12)
                rows.append(("sw", 0, "lower", r12, b.lo_r1, b.lo_r2, b.lo_sum, None))
            return rows
        sample = sample_wak_region(src, _search(args), cards)
        for s in sample.samples:
            b = s.bounds
            rows.append(("wak", s.aux_id, "lower", b.lo_r12, b.lo_r1, b.lo_r2, b.lo_sum, None))
            for name, c in zip(("corner1", "corner2"), s.corners):
                rows.append(("wak", s.aux_id, name, c.r12, c.r1, c.r2, c.r1 + c.r2, None))
        return rows

    ch = _typed(args.specs[0], channel_from_doc, docs[0])
    if kind == "dbc":
        if ch.p_x is None:
            raise CliError(EXIT_INFEASIBLE, "the dbc region needs an input PMF ('pmf X') in the channel file")
        for r12 in grid:
            b = dbc_bounds(ch, ch.p_x, r12)
            rows.append(("dbc", 0, "upper", r12, b.r1_max, b.r2_max, b.sum_max, None))
        return rows
    if kind == "pdbc":
        if sorted(ch.f.tolist()) != list(range(ch.x_alphabet.size)) or ch.y1_alphabet.size != ch.x_alphabet.size:
            raise CliError(EXIT_INFEASIBLE, "the pdbc region needs Y1 to be a relabeling of X")
        sample = sample_bc_region(ch, _search(args), (1, cards[1]), [0.0])
        for s in sample.samples:
            ux = marginalize(compose_bc(ch, s.aux), ("U", "X"))
            for r12 in grid:
                for name, b in (("three", pdbc_bounds(ch, ux, r12)), ("two", pdbc_two_bound(ch, ux, r12))):
                    rows.append(("pdbc", s.aux_id, name, r12, b.r1_max, b.r2_max, b.sum_max, None))
        return rows

    sample = sample_bc_region(ch, _search(args), cards, grid)
    for s in sample.samples:
        if kind == "bc":
            for b in s.bounds:
                rows.append(("bc", s.aux_id, "upper", b.r12, b.r1_max, b.r2_max, b.sum_max_a, b.sum_max_b))
            for name, c in zip(("corner1", "corner2"), s.corners):
                rows.append(("bc", s.aux_id, name, c.r12, c.r1, c.r2, c.r1 + c.r2, None))
        elif kind == "bc-alt":
            b = bc_alt_bounds(ch, s.aux)
            rows.append(("bc-alt", s.aux_id, "alt", b.lo_r12, b.r1_max, b.i_vu_y2, b.sum_max, None))
        else:  # rbc
            vux = marginalize(compose_bc(ch, s.aux), ("V", "U", "X"))
            for r12 in grid:
                if r12 > 1:
                    raise CliError(EXIT_INFEASIBLE, "the rbc region uses a binary relay input; R12 must be <= 1")
                joint = rbc_joint(vux, ch, _binary_with_entropy(r12), [0, 1], 2)
                b = rbc_reduced_bounds(joint)
                rows.append(("rbc", s.aux_id, "upper", r12, b.r1_max, b.r2_max, b.sum_max_a, b.sum_max_b))
    return rows


def cmd_region(args) -> int:
    kinds = ("source",) if args.region in ("wak", "sw") else ("channel",)
    docs = _specs(args, kinds)
    rows = _region_rows(args, docs)
    _emit(args, "region", _csv(rows, REGION_COLUMNS), args.specs[:1])
    return EXIT_OK


# --- duality ---------------------------------------------------------------------------

def cmd_duality(args) -> int:
    src_doc, aux_doc = _specs(args, ("source", "aux-wak"))
    src = _typed(args.specs[0], source_from_doc, src_doc)
    aux = _typed(args.specs[1], wak_aux_from_doc, aux_doc, src)
    rep = duality_check_joint(compose_wak(src, aux))
    lines = [
        f"markov_v_given_x1={_r(rep.markov_v)}",
        f"markov_u_given_x2v={_r(rep.markov_u)}",
        f"identity_v_residual={_r(rep.identity_v)}",
        f"identity_u_residual={_r(rep.identity_u)}",
        f"corner_residual={_r(rep.corner_residual)}",
    ]
    for i, (s, c) in enumerate(zip(rep.source_corners, rep.channel_corners), start=1):
        lines.append(f"source_corner{i}={','.join(_r(v) for v in s)}")
        lines.append(f"channel_corner{i}={','.join(_r(v) for v in c)}")
    ok = rep.ok(args.tol)
    lines.append(f"status={'ok' if ok else 'fail'}")
    _emit(args, "duality", "\n".join(lines) + "\n", args.specs[:2])
    return EXIT_OK if ok else EXIT_CHECK


# --- fme -------------------------------------------------------------------------------

def cmd_fme(args) -> int:
    doc = _specs(args, ("ineq-system",))[0]
    system = doc.system
    elim = [v.strip() for v in args.eliminate.split(",") if v.strip()] if args.eliminate else []
    unknown = [v for v in elim if v not in system.vars]
    if unknown:
        raise CliError(EXIT_INFEASIBLE, f"cannot eliminate undeclared variables {unknown}")
    try:
        if elim:
            out = fme_eliminate_all(system, elim)
            if args.witnesses > 0:
                wit = feasible_witnesses(system, np.random.default_rng(args.seed), args.witnesses)
                out = remove_redundant(out, wit)
        else:
            out = system
    except SystemError_ as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc)) from None
    text = format_system(out)
    code = EXIT_OK
    inputs = [args.specs[0]]
    if args.check_against:
        other = _load(args.check_against, "ineq-system").system
        inputs.append(args.check_against)
        if not systems_equal(out, other, include_constant=args.include_constant):
            print("derived system differs from " + args.check_against, file=sys.stderr)
            code = EXIT_CHECK
    _emit(args, "fme", text, inputs)
    return code


# --- simulate --------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    ns = _ints(args.n_sweep, "--n-sweep")
    base = dict(trials=args.trials, eps=args.eps, seed=args.seed, theta=args.theta,
                codebook_cap=args.cap, allow_infeasible=args.allow_infeasible, r12=args.r12)
    if args.scheme in ("wak1", "wak2"):
        src_doc, aux_doc = _specs(args, ("source", "aux-wak"))
        src = _typed(args.specs[0], source_from_doc, src_doc)
        aux = _typed(args.specs[1], wak_aux_from_doc, aux_doc, src)
        fn = simulate_wak_corner1 if args.scheme == "wak1" else simulate_wak_corner2
        run = lambda cfg: fn(src, aux, cfg)  # noqa: E731
        inputs = args.specs[:2]
    else:
        ch_doc = _specs(args, ("channel",))[0]
        ch = _typed(args.specs[0], channel_from_doc, ch_doc)
        inputs = args.specs[:1]
        if len(args.specs) > 1:
            aux3 = _typed(args.specs[1], bc_aux_from_doc, _load(args.specs[1], "aux-bc"), ch)
            if "U1" not in aux3.names:
                raise CliError(EXIT_PARSE, f"{args.specs[1]}: the simulation needs a PMF over V U1 U2 X")
            inputs = args.specs[:2]
        elif ch.p_x is not None and ch.is_deterministic():
            aux3 = deterministic_output_aux(ch, ch.p_x)
        else:
            raise CliError(EXIT_INFEASIBLE, "give an aux-bc file (pmf V U1 U2 X) or a deterministic channel with 'pmf X'")
        run = lambda cfg: simulate_bc(ch, aux3, cfg)  # noqa: E731
    reports = [run(SimConfig(n=n, **base)) for n in ns]
    extra = {"stages": (args.stages_out, stages_to_long_csv(reports))} if args.stages_out else None
    _emit(args, "simulate", reports_to_csv(reports), inputs, extra)
    return EXIT_OK


# --- markov ----------------------------------------------------------------------------

def _parse_query(text: str) -> MarkovQuery:
    parts = [p.split() for p in text.split("|")]
    if len(parts) not in (2, 3):
        raise CliError(EXIT_PARSE, "--query takes 'A ... | B ... [| C ...]'")
    try:
        return MarkovQuery(*parts)
    except GraphError as exc:
        raise CliError(EXIT_PARSE, f"--query: {exc}") from exc


def cmd_markov(args) -> int:
    doc = _specs(args, ("fdg",))[0]
    bundle = _typed(args.specs[0], graph_from_doc, doc)
    q = _parse_query(args.query) if args.query else bundle.query
    if q is None:
        raise CliError(EXIT_PARSE, "no query in the graph file and no --query given")
    g, spec = bundle.fdg, bundle.factors
    if spec is None and g is not None:
        spec = factorization_from_fdg(g)
    methods = ("undirected", "dsep") if args.method == "both" else (args.method,)
    lines = [f"query={' '.join(sorted(q.a))} | {' '.join(sorted(q.b))} | {' '.join(sorted(q.c))}"]
    code = EXIT_OK
    for m in methods:
        if m == "dsep" and g is None:
            raise CliError(EXIT_INFEASIBLE, "d-separation needs directed edges or factors with outputs")
        verdict = undirected_markov_check(spec, q) if m == "undirected" else d_separation_check(g, q)
        lines.append(f"{m}={'true' if verdict else 'false'}")
        if args.crosscheck:
            if m == "dsep":
                sampler = lambda rng: instantiate_fdg(g, rng)  # noqa: E731
            else:
                sampler = lambda rng: instantiate_factors(spec, rng)  # noqa: E731
            rep = soundness_crosscheck(q, verdict, sampler, args.crosscheck, args.seed)
            lines.append(f"{m}.crosscheck.instantiations={rep.instantiations}")
            lines.append(f"{m}.crosscheck.max_cmi={_r(rep.max_cmi)}")
            lines.append(f"{m}.crosscheck.violations={rep.violations}")
            if not rep.sound:
                code = EXIT_CHECK
    extra = {"dot": (args.dot, g.to_dot())} if args.dot and g is not None else None
    _emit(args, "markov", "\n".join(lines) + "\n", args.specs[:1], extra)
    return code


# --- acceptance ------------------------------------------------------------------------

def cmd_accept(args) -> int:
    from .acceptance import run_all

    only = _ints(args.only, "--only") if args.only else None
    results = run_all(only, quick=args.quick)
    lines = [r.line() for r in results]
    _emit(args, "accept", "\n".join(lines) + "\n", [])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


# --- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopduality", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output file (default: stdout); a .manifest file is written next to it")

    r = sub.add_parser("region", help="sample rate-bound records and corner points")
    r.add_argument("specs", nargs="+", help="source file (wak, sw) or channel file (others)")
    r.add_argument("--region", choices=REGIONS, required=True)
    r.add_argument("--cards", default="2,2", help="auxiliary alphabet sizes |V|,|U|")
    r.add_argument("--grid-step", type=float, default=0.5, help="grid step on each conditional row")
    r.add_argument("--random", type=int, default=0, help="draw this many random auxiliaries instead of a grid")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--r12-grid", default="0", help="comma-separated cooperation rates")
    common(r)
    r.set_defaults(func=cmd_region)

    d = sub.add_parser("duality", help="check the Markov identities and the corner-point correspondence")
    d.add_argument("specs", nargs=2, help="source file and aux-wak file")
    d.add_argument("--tol", type=float, default=1e-9)
    common(d)
    d.set_defaults(func=cmd_duality)

    f = sub.add_parser("fme", help="eliminate rate variables from an inequality system")
    f.add_argument("specs", nargs=1, help="ineq-system file")
    f.add_argument("--eliminate", default="", help="comma-separated variables to eliminate")
    f.add_argument("--check-against", help="ineq-system file the result must equal")
    f.add_argument("--include-constant", action="store_true", help="also compare rate-free conditions")
    f.add_argument("--witnesses", type=int, default=40, help="witness joints for redundancy removal (0 disables)")
    f.add_argument("--seed", type=int, default=0)
    common(f)
    f.set_defaults(func=cmd_fme)

    s = sub.add_parser("simulate", help="Monte-Carlo run of a coding scheme over a blocklength sweep")
    s.add_argument("specs", nargs="+", help="source + aux-wak files (wak1, wak2) or channel [+ aux-bc] (bc)")
    s.add_argument("--scheme", choices=("wak1", "wak2", "bc"), required=True)
    s.add_argument("--n-sweep", default="8,12,16")
    s.add_argument("--theta", type=float, default=0.5)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--r12", type=float, default=None, help="cooperation rate (bc; default 0)")
    s.add_argument("--cap", type=int, default=1 << 20, help="largest codebook allowed")
    s.add_argument("--allow-infeasible", action="store_true", help="permit rates outside the achievable bounds")
    s.add_argument("--stages-out", help="also write per-stage failure counts in long form")
    common(s)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("markov", help="graphical Markov-chain checks")
    m.add_argument("specs", nargs=1, help="fdg file")
    m.add_argument("--query", help="'A ... | B ... [| C ...]'; overrides the file's query")
    m.add_argument("--method", choices=("undirected", "dsep", "both"), default="both")
    m.add_argument("--crosscheck", type=int, default=0, help="number of numeric instantiations to test")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--dot", help="write the directed graph in DOT form")
    common(m)
    m.set_defaults(func=cmd_markov)

    a = sub.add_parser("accept", help="run the acceptance criteria and print PASS/FAIL lines")
    a.add_argument("--only", help="comma-separated criterion numbers")
    a.add_argument("--quick", action="store_true", help="smaller simulation sweep")
    common(a)
    a.set_defaults(func=cmd_accept)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SimConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RegionError, GraphError, PmfError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BrokenPipeError:
        # reader closed early (e.g. `| head`); silence the flush at interpreter exit
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
