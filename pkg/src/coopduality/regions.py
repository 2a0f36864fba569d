"""Rate-bound records, corner points and auxiliary constructions.

Source side (cooperative WAK coordination): axes X1, X2, V, U, Y with X1 = f(Y).
Channel side (semi-deterministic BC with decoder cooperation): axes V, U, Y1, X, Y2
with Y1 = f(X). All rates are in bits.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .probability import (
    Alphabet,
    ConditionalPmf,
    InfoCalc,
    JointPmf,
    PmfError,
    compose,
    deterministic_conditional,
    marginalize,
    total_variation,
)

TOL = 1e-9
COORD_TV_TOL = 1e-6


class RegionError(ValueError):
    """Invalid problem description, auxiliary or search request."""


class CardinalityWarning(UserWarning):
    """Auxiliary alphabet exceeds the size that suffices for the region."""


# --- problem descriptions --------------------------------------------------------

def _check_map(f, src: Alphabet, dst: Alphabet, label: str) -> np.ndarray:
    f = np.asarray(f, dtype=np.int64).reshape(-1)
    if f.size != src.size:
        raise RegionError(f"{label} must list {src.size} entries, got {f.size}")
    if np.any(f < 0) or np.any(f >= dst.size):
        raise RegionError(f"{label} maps outside the {dst.name} alphabet")
    f.setflags(write=False)
    return f


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Correlated source pair (X1, X2), coordination alphabet Y and the map f: Y -> X1.

    ``target`` optionally pins the coordination PMF over (X1, X2, Y); when absent
    any auxiliary with X1 = f(Y) is admissible.
    """

    joint: JointPmf
    f: np.ndarray
    y_alphabet: Alphabet
    target: JointPmf | None = None

    def __post_init__(self) -> None:
        if self.joint.names != ("X1", "X2"):
            raise RegionError(f"source joint must have axes (X1, X2), got {self.joint.names}")
        if self.y_alphabet.name != "Y":
            raise RegionError("coordination alphabet must be named Y")
        object.__setattr__(self, "f", _check_map(self.f, self.y_alphabet, self.x1, "f"))
        if self.target is not None:
            if sorted(self.target.names) != ["X1", "X2", "Y"]:
                raise RegionError("target must be a PMF over X1, X2, Y")
            t = self.target.reorder(("X1", "X2", "Y"))
            if total_variation(marginalize(t, ("X1", "X2")), self.joint) > TOL:
                raise RegionError("target (X1, X2) marginal differs from the source")
            mass = t.values.sum(axis=1)
            bad = mass[np.arange(self.x1.size)[:, None] != self.f[None, :]]
            if bad.sum() > TOL:
                raise RegionError("target puts mass where X1 != f(Y)")
            object.__setattr__(self, "target", t)

    @property
    def x1(self) -> Alphabet:
        return self.joint.axis("X1")

    @property
    def x2(self) -> Alphabet:
        return self.joint.axis("X2")

    def is_identity_map(self) -> bool:
        return self.y_alphabet.size == self.x1.size and bool(np.all(self.f == np.arange(self.x1.size)))


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Broadcast channel with Y1 = f(X) and a noisy second output P(Y2|X).

    ``p_x`` optionally fixes the input distribution used by searches.
    """

    x_alphabet: Alphabet
    f: np.ndarray
    noisy: ConditionalPmf
    y1_alphabet: Alphabet = field(default_factory=lambda: Alphabet("Y1", 2))
    p_x: JointPmf | None = None

    def __post_init__(self) -> None:
        if self.x_alphabet.name != "X" or self.y1_alphabet.name != "Y1":
            raise RegionError("channel alphabets must be named X and Y1")
        object.__setattr__(self, "f", _check_map(self.f, self.x_alphabet, self.y1_alphabet, "f"))
        if self.noisy.given_names != ("X",) or self.noisy.target_names != ("Y2",):
            raise RegionError("noisy component must be P(Y2|X)")
        if self.noisy.given_axes[0].size != self.x_alphabet.size:
            raise RegionError("P(Y2|X) input size differs from X")
        if self.p_x is not None and (self.p_x.names != ("X",) or self.p_x.shape != (self.x_alphabet.size,)):
            raise RegionError("input PMF must be over X alone")

    @property
    def y2_alphabet(self) -> Alphabet:
        return self.noisy.target_axes[0]

    def is_deterministic(self) -> bool:
        rows = self.noisy.rows()
        return bool(np.all(np.isclose(rows.max(axis=1), 1.0, atol=TOL)))

    def y1_conditional(self) -> ConditionalPmf:
        return deterministic_conditional(self.y1_alphabet, [self.x_alphabet], self.f)


# --- auxiliaries -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WakAux:
    v_alphabet: Alphabet
    u_alphabet: Alphabet
    p_v_given_x1: ConditionalPmf
    p_u_given_x2v: ConditionalPmf
    p_y_given_x1uv: ConditionalPmf

    def __post_init__(self) -> None:
        want = [
            (self.p_v_given_x1, ("V",), ("X1",)),
            (self.p_u_given_x2v, ("U",), ("X2", "V")),
            (self.p_y_given_x1uv, ("Y",), ("X1", "U", "V")),
        ]
        for cond, tgt, given in want:
            if cond.target_names != tgt or cond.given_names != given:
                raise RegionError(f"expected P({','.join(tgt)}|{','.join(given)}), got {cond!r}")
        if self.p_v_given_x1.target_axes[0] != self.v_alphabet or self.p_u_given_x2v.target_axes[0] != self.u_alphabet:
            raise RegionError("auxiliary alphabets disagree with the conditionals")

    @classmethod
    def from_arrays(cls, src: SourceSpec, pv, pu, py) -> "WakAux":
        """pv[x1, v], pu[x2, v, u], py[x1, u, v, y]."""
        pv = np.asarray(pv, float)
        pu = np.asarray(pu, float)
        V = Alphabet("V", pv.shape[-1])
        U = Alphabet("U", pu.shape[-1])
        return cls(V, U,
                   ConditionalPmf([V], [src.x1], pv),
                   ConditionalPmf([U], [src.x2, V], pu),
                   ConditionalPmf([src.y_alphabet], [src.x1, U, V], py))

    @property
    def cards(self) -> tuple[int, int]:
        return self.v_alphabet.size, self.u_alphabet.size


@dataclass(frozen=True, eq=False)
class BcAux:
    p_vuy1: JointPmf
    p_x_given_vuy1: ConditionalPmf

    def __post_init__(self) -> None:
        if self.p_vuy1.names != ("V", "U", "Y1"):
            raise RegionError("BC auxiliary joint must have axes (V, U, Y1)")
        c = self.p_x_given_vuy1
        if c.target_names != ("X",) or c.given_names != ("V", "U", "Y1"):
            raise RegionError("BC auxiliary conditional must be P(X|V,U,Y1)")

    @classmethod
    def from_vux(cls, joint: JointPmf, ch: ChannelSpec) -> "BcAux":
        """Build from any PMF over (V, U, X); Y1 follows deterministically."""
        joint = joint.reorder(("V", "U", "X"))
        if joint.axis("X").size != ch.x_alphabet.size:
            raise RegionError("auxiliary X alphabet differs from the channel")
        vals = joint.values
        onehot = np.zeros((ch.x_alphabet.size, ch.y1_alphabet.size))
        onehot[np.arange(ch.x_alphabet.size), ch.f] = 1.0
        pvuy = np.einsum("vux,xy->vuy", vals, onehot)
        # conditional of X on (V,U,Y1); empty rows fall back to uniform on the preimage
        num = np.einsum("vux,xy->vuyx", vals, onehot)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = num / pvuy[..., None]
        empty = pvuy <= 0
        pre = onehot.T / np.maximum(onehot.sum(axis=0)[:, None], 1)
        pre[onehot.sum(axis=0) == 0] = 1.0 / ch.x_alphabet.size
        cond[empty] = np.broadcast_to(pre, cond.shape)[empty]
        V, U = joint.axis("V"), joint.axis("U")
        return cls(JointPmf([V, U, ch.y1_alphabet], pvuy),
                   ConditionalPmf([ch.x_alphabet], [V, U, ch.y1_alphabet], cond))

    @property
    def cards(self) -> tuple[int, int]:
        return self.p_vuy1.axis("V").size, self.p_vuy1.axis("U").size


@dataclass(frozen=True)
class RatePoint:
    r12: float
    r1: float
    r2: float

    def __post_init__(self) -> None:
        for name in ("r12", "r1", "r2"):
            v = getattr(self, name)
            if v < -TOL:
                raise RegionError(f"rate {name} = {v} is negative")
            if v < 0:
                object.__setattr__(self, name, 0.0)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r12, self.r1, self.r2)


@dataclass(frozen=True)
class MixParam:
    lam: float
    gamma: float
    branch: str = ""

    def __post_init__(self) -> None:
        if not (-TOL <= self.lam <= 1 + TOL):
            raise RegionError(f"mixing probability {self.lam} outside [0, 1]")
        if self.gamma < -TOL:
            raise RegionError(f"gamma {self.gamma} is negative")


def _pos(x: float) -> float:
    return x if x > 0 else 0.0


def compose_wak(src: SourceSpec, aux: WakAux) -> JointPmf:
    """Joint over (X1, X2, V, U, Y)."""
    if aux.p_v_given_x1.given_axes[0] != src.x1 or aux.p_u_given_x2v.given_axes[0] != src.x2:
        raise RegionError("auxiliary alphabets do not match the source")
    if aux.p_y_given_x1uv.target_axes[0] != src.y_alphabet:
        raise RegionError("auxiliary Y alphabet does not match the source")
    p = compose(src.joint, aux.p_v_given_x1)
    p = compose(p, aux.p_u_given_x2v)
    return compose(p, aux.p_y_given_x1uv)


def wak_violations(src: SourceSpec, aux: WakAux, joint: JointPmf | None = None,
                   tv_tol: float = COORD_TV_TOL) -> list[str]:
    """Reasons the auxiliary is inadmissible; empty when it is valid."""
    p = joint if joint is not None else compose_wak(src, aux)
    out = []
    xy = marginalize(p, ("X1", "Y")).values
    off = xy[np.arange(src.x1.size)[:, None] != src.f[None, :]].sum()
    if off > TOL:
        out.append(f"X1 differs from f(Y) with probability {off:.3g}")
    if src.target is not None:
        tv = total_variation(marginalize(p, ("X1", "X2", "Y")), src.target)
        if tv > tv_tol:
            out.append(f"coordination marginal misses the target by TV {tv:.3g}")
    return out


def cardinality_warnings_wak(src: SourceSpec, aux: WakAux) -> None:
    v, u = aux.cards
    if v > src.x1.size + 4:
        warnings.warn(f"|V|={v} exceeds |X1|+4={src.x1.size + 4}", CardinalityWarning, stacklevel=2)
    if u > v * src.x2.size + 3:
        warnings.warn(f"|U|={u} exceeds |V||X2|+3={v * src.x2.size + 3}", CardinalityWarning, stacklevel=2)


def compose_bc(ch: ChannelSpec, aux: BcAux) -> JointPmf:
    """Joint over (V, U, Y1, X, Y2)."""
    if aux.p_x_given_vuy1.target_axes[0] != ch.x_alphabet:
        raise RegionError("auxiliary X alphabet does not match the channel")
    if aux.p_vuy1.axis("Y1") != ch.y1_alphabet:
        raise RegionError("auxiliary Y1 alphabet does not match the channel")
    p = compose(aux.p_vuy1, aux.p_x_given_vuy1)
    yx = marginalize(p, ("Y1", "X")).values
    off = yx[np.arange(ch.y1_alphabet.size)[:, None] != ch.f[None, :]].sum()
    if off > TOL:
        raise RegionError(f"auxiliary violates Y1 = f(X) with probability {off:.3g}")
    return compose(p, ch.noisy)


def cardinality_warnings_bc(ch: ChannelSpec, aux: BcAux) -> None:
    v, u = aux.cards
    x = ch.x_alphabet.size
    if v > x + 3:
        warnings.warn(f"|V|={v} exceeds |X|+3={x + 3}", CardinalityWarning, stacklevel=2)
    if u > v * x + 1:
        warnings.warn(f"|U|={u} exceeds |V||X|+1={v * x + 1}", CardinalityWarning, stacklevel=2)


# --- source-side bounds --------------------------------------------------------

@dataclass(frozen=True)
class WakBounds:
    """Lower bounds on (R12, R1, R2, R1+R2)."""

    lo_r12: float
    lo_r1: float
    lo_r2: float
    lo_sum: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lo_r12, self.lo_r1, self.lo_r2, self.lo_sum)

    def contains(self, pt: RatePoint, tol: float = TOL) -> bool:
        return (pt.r12 >= self.lo_r12 - tol and pt.r1 >= self.lo_r1 - tol
                and pt.r2 >= self.lo_r2 - tol and pt.r1 + pt.r2 >= self.lo_sum - tol)

    def dominated_by(self, other: "WakBounds", tol: float = 1e-12) -> bool:
        """True when every constraint of ``other`` is at most as demanding."""
        return all(o <= s + tol for s, o in zip(self.as_tuple(), other.as_tuple()))


def wak_bounds_from_joint(p: JointPmf) -> WakBounds:
    m = InfoCalc(p)
    h_x1_vu = m.H("X1", ("V", "U"))
    return WakBounds(
        lo_r12=m.I("V", "X1", "X2"),
        lo_r1=h_x1_vu,
        lo_r2=m.I("U", "X2", ("X1", "V")),
        lo_sum=h_x1_vu + m.I(("V", "U"), ("X1", "X2")),
    )


def wak_bounds(src: SourceSpec, aux: WakAux) -> WakBounds:
    return wak_bounds_from_joint(compose_wak(src, aux))


def wak_corner_points_from_joint(p: JointPmf) -> tuple[RatePoint, RatePoint]:
    m = InfoCalc(p)
    r12 = m.I("V", "X1", "X2")
    return (RatePoint(r12, m.H("X1"), m.I("U", "X2", ("X1", "V"))),
            RatePoint(r12, m.H("X1", ("V", "U")), m.I("U", "X2", "V") + m.I("V", "X1")))


def wak_corner_points(src: SourceSpec, aux: WakAux) -> tuple[RatePoint, RatePoint]:
    return wak_corner_points_from_joint(compose_wak(src, aux))


# --- channel-side bounds -------------------------------------------------------

@dataclass(frozen=True)
class BcBounds:
    """Upper bounds on R1, R2 and two sum-rate bounds at a fixed R12."""

    r12: float
    r1_max: float
    r2_max: float
    sum_max_a: float
    sum_max_b: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r1_max, self.r2_max, self.sum_max_a, self.sum_max_b)

    @property
    def sum_max(self) -> float:
        return min(self.sum_max_a, self.sum_max_b)

    def contains(self, pt: RatePoint, tol: float = TOL) -> bool:
        if abs(pt.r12 - self.r12) > tol and pt.r12 < self.r12:
            # a smaller cooperation rate is not covered by these bounds
            return False
        return (pt.r1 <= self.r1_max + tol and pt.r2 <= self.r2_max + (pt.r12 - self.r12) + tol
                and pt.r1 + pt.r2 <= min(self.sum_max_a, self.sum_max_b + (pt.r12 - self.r12)) + tol)

    def vertices(self) -> list[RatePoint]:
        return [RatePoint(self.r12, a, b) for a, b in polygon_vertices(self.r1_max, self.r2_max, self.sum_max)]


def polygon_vertices(r1_max: float, r2_max: float, sum_max: float) -> list[tuple[float, float]]:
    """Vertices of {r1, r2 >= 0, r1 <= a, r2 <= b, r1 + r2 <= c}; empty when infeasible."""
    a, b, c = r1_max, r2_max, sum_max
    if a < -TOL or b < -TOL or c < -TOL:
        return []
    a, b, c = max(a, 0.0), max(b, 0.0), max(c, 0.0)
    pts = [(0.0, 0.0), (min(a, c), 0.0), (0.0, min(b, c))]
    if c - a >= 0 and c - a <= b:
        pts.append((a, c - a))
    if c - b >= 0 and c - b <= a:
        pts.append((c - b, b))
    if a + b <= c:
        pts.append((a, b))
    out: list[tuple[float, float]] = []
    for p in pts:
        if all(abs(p[0] - q[0]) > 1e-15 or abs(p[1] - q[1]) > 1e-15 for q in out):
            out.append(p)
    return out


def bc_bounds_from_joint(p: JointPmf, r12: float) -> BcBounds:
    m = InfoCalc(p)
    h_y1_vu = m.H("Y1", ("V", "U"))
    i_vu_y2 = m.I(("V", "U"), "Y2")
    return BcBounds(
        r12=r12,
        r1_max=m.H("Y1"),
        r2_max=i_vu_y2 + r12,
        sum_max_a=h_y1_vu + m.I("U", "Y2", "V") + m.I("V", "Y1"),
        sum_max_b=h_y1_vu + i_vu_y2 + r12,
    )


def bc_bounds(ch: ChannelSpec, aux: BcAux, r12: float) -> BcBounds:
    if r12 < 0:
        raise RegionError("cooperation rate must be nonnegative")
    return bc_bounds_from_joint(compose_bc(ch, aux), r12)


@dataclass(frozen=True)
class BcAltBounds:
    """Alternative characterization: a lower bound on R12 and three upper bounds."""

    lo_r12: float
    r1_max: float
    i_vu_y2: float
    sum_max: float

    def r2_max(self, r12: float) -> float:
        return self.i_vu_y2 + r12

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lo_r12, self.r1_max, self.i_vu_y2, self.sum_max)

    def contains(self, pt: RatePoint, tol: float = TOL) -> bool:
        return (pt.r12 >= self.lo_r12 - tol and pt.r1 <= self.r1_max + tol
                and pt.r2 <= self.r2_max(pt.r12) + tol and pt.r1 + pt.r2 <= self.sum_max + tol)

    def failing(self, pt: RatePoint, tol: float = TOL) -> list[str]:
        out = []
        if pt.r12 < self.lo_r12 - tol:
            out.append("cooperation rate below I(V;Y1)-I(V;Y2)")
        if pt.r1 > self.r1_max + tol:
            out.append("R1 above H(Y1)")
        if pt.r2 > self.r2_max(pt.r12) + tol:
            out.append("R2 above I(V,U;Y2)+R12")
        if pt.r1 + pt.r2 > self.sum_max + tol:
            out.append("R1+R2 above H(Y1|V,U)+I(U;Y2|V)+I(V;Y1)")
        return out


def bc_alt_bounds_from_joint(p: JointPmf) -> BcAltBounds:
    m = InfoCalc(p)
    return BcAltBounds(
        lo_r12=m.I("V", "Y1") - m.I("V", "Y2"),
        r1_max=m.H("Y1"),
        i_vu_y2=m.I(("V", "U"), "Y2"),
        sum_max=m.H("Y1", ("V", "U")) + m.I("U", "Y2", "V") + m.I("V", "Y1"),
    )


def bc_alt_bounds(ch: ChannelSpec, aux: BcAux) -> BcAltBounds:
    return bc_alt_bounds_from_joint(compose_bc(ch, aux))


def bc_corner_points_from_joint(p: JointPmf, clamp: bool = True) -> tuple[RatePoint, RatePoint]:
    """Corner points; ``clamp=False`` returns the raw triples without the nonnegativity fix."""
    m = InfoCalc(p)
    gap = m.I("V", "Y1") - m.I("V", "Y2")
    r2a = m.I("U", "Y2", "V") - m.I("U", "Y1", "V")
    if clamp:
        gap, r2a = _pos(gap), _pos(r2a)
        return (RatePoint(gap, m.H("Y1"), r2a),
                RatePoint(gap, m.H("Y1", ("V", "U")), m.I("U", "Y2", "V") + m.I("V", "Y1")))
    return ((gap, m.H("Y1"), r2a),  # type: ignore[return-value]
            (gap, m.H("Y1", ("V", "U")), m.I("U", "Y2", "V") + m.I("V", "Y1")))


def bc_corner_points(ch: ChannelSpec, aux: BcAux) -> tuple[RatePoint, RatePoint]:
    return bc_corner_points_from_joint(compose_bc(ch, aux))


# --- duality -----------------------------------------------------------------

SOURCE_TO_CHANNEL = {"X1": "Y1", "X2": "Y2", "Y": "X"}


@dataclass(frozen=True)
class DualityReport:
    markov_v: float          # I(V;X2|X1)
    markov_u: float          # I(U;X1|X2,V)
    identity_v: float        # |I(V;X1|X2) - (I(V;X1) - I(V;X2))|
    identity_u: float        # |I(U;X2|X1,V) - (I(U;X2|V) - I(U;X1|V))|
    corner_residual: float   # max |source corner - channel corner on renamed joint|
    source_corners: tuple
    channel_corners: tuple

    @property
    def markov_ok(self) -> bool:
        return self.markov_v <= TOL and self.markov_u <= TOL

    @property
    def max_residual(self) -> float:
        return max(self.identity_v, self.identity_u, self.corner_residual)

    def ok(self, tol: float = TOL) -> bool:
        return self.markov_ok and self.max_residual <= tol


def duality_check_joint(p: JointPmf) -> DualityReport:
    m = InfoCalc(p)
    markov_v = m.I("V", "X2", "X1")
    markov_u = m.I("U", "X1", ("X2", "V"))
    id_v = abs(m.I("V", "X1", "X2") - (m.I("V", "X1") - m.I("V", "X2")))
    id_u = abs(m.I("U", "X2", ("X1", "V")) - (m.I("U", "X2", "V") - m.I("U", "X1", "V")))
    src = wak_corner_points_from_joint(p)
    ch = bc_corner_points_from_joint(p.rename(SOURCE_TO_CHANNEL))
    resid = max(abs(a - b) for s, c in zip(src, ch) for a, b in zip(s.as_tuple(), c.as_tuple()))
    return DualityReport(markov_v, markov_u, id_v, id_u, resid,
                         tuple(s.as_tuple() for s in src), tuple(c.as_tuple() for c in ch))


def duality_check(src: SourceSpec, aux: WakAux) -> DualityReport:
    """Markov identities of the source structure and the renamed corner-point match.

    Raises when the composed joint violates the required Markov chains.
    """
    rep = duality_check_joint(compose_wak(src, aux))
    if not rep.markov_ok:
        raise RegionError(f"Markov precondition fails: I(V;X2|X1)={rep.markov_v:.3g}, "
                          f"I(U;X1|X2,V)={rep.markov_u:.3g}")
    return rep


# --- search grids --------------------------------------------------------------

@dataclass(frozen=True)
class SearchSpec:
    """Grid step on every conditional row, or a count of uniform random draws."""

    step: float | None = 0.25
    random_count: int = 0
    seed: int = 0
    max_candidates: int = 500_000
    tv_tol: float = COORD_TV_TOL

    def __post_init__(self) -> None:
        if self.random_count < 0:
            raise RegionError("random count must be nonnegative")
        if self.random_count == 0:
            grid_divisions(self.step)


def grid_divisions(step: float | None) -> int:
    if step is None or not (0 < step <= 1):
        raise RegionError(f"grid step must lie in (0, 1], got {step}")
    m = round(1 / step)
    if abs(m * step - 1) > 1e-9:
        raise RegionError(f"grid step {step} does not divide 1")
    return m


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates in {0, 1/m, ..., 1}."""
    if k == 1:
        return np.ones((1, 1))
    pts = []
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        prev = -1
        comp = []
        for b in bars:
            comp.append(b - prev - 1)
            prev = b
        comp.append(m + k - 2 - prev)
        pts.append(comp)
    return np.asarray(pts, float) / m


def simplex_grid_size(k: int, m: int) -> int:
    return math.comb(m + k - 1, k - 1)


@dataclass(frozen=True)
class _RowSpec:
    rows: int
    support: tuple  # per row: indices of allowed outcomes
    width: int      # full outcome count


def _row_candidates(spec: _RowSpec, m: int) -> list[np.ndarray]:
    """Grid options for each row as dense probability vectors."""
    out = []
    for sup in spec.support:
        g = simplex_grid(len(sup), m)
        dense = np.zeros((g.shape[0], spec.width))
        dense[:, list(sup)] = g
        out.append(dense)
    return out


def _count_grid(specs: Sequence[_RowSpec], m: int) -> int:
    total = 1
    for s in specs:
        for sup in s.support:
            total *= simplex_grid_size(len(sup), m)
    return total


def _iter_grid(specs: Sequence[_RowSpec], m: int) -> Iterator[list[np.ndarray]]:
    options = []
    shapes = []
    for s in specs:
        rows = _row_candidates(s, m)
        options.extend(rows)
        shapes.append(len(rows))
    for combo in itertools.product(*[range(o.shape[0]) for o in options]):
        tables, k = [], 0
        for s, n in zip(specs, shapes):
            tables.append(np.stack([options[k + r][combo[k + r]] for r in range(n)]))
            k += n
        yield tables


def _iter_random(specs: Sequence[_RowSpec], count: int, seed: int) -> Iterator[list[np.ndarray]]:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        tables = []
        for s in specs:
            t = np.zeros((s.rows, s.width))
            for r, sup in enumerate(s.support):
                t[r, list(sup)] = rng.dirichlet(np.ones(len(sup)))
            tables.append(t)
        yield tables


def _iter_candidates(specs: Sequence[_RowSpec], search: SearchSpec) -> Iterator[list[np.ndarray]]:
    if search.random_count:
        return _iter_random(specs, search.random_count, search.seed)
    m = grid_divisions(search.step)
    n = _count_grid(specs, m)
    if n > search.max_candidates:
        raise RegionError(f"grid has {n} candidates (cap {search.max_candidates}); "
                          "use a coarser step, smaller cards or random sampling")
    return _iter_grid(specs, m)


@dataclass(frozen=True, eq=False)
class WakSample:
    aux_id: int
    aux: WakAux
    bounds: WakBounds
    corners: tuple


@dataclass(frozen=True, eq=False)
class BcSample:
    aux_id: int
    aux: BcAux
    bounds: tuple  # one BcBounds per cooperation rate
    corners: tuple


@dataclass(frozen=True, eq=False)
class RateRegionSample:
    kind: str
    cards: tuple
    samples: tuple
    skipped: int = 0


def _check_cards(cards: Sequence[int]) -> tuple[int, int]:
    if len(cards) != 2 or min(cards) < 1:
        raise RegionError(f"cards must be two integers >= 1, got {cards}")
    return int(cards[0]), int(cards[1])


def wak_search_rows(src: SourceSpec, cards: Sequence[int]) -> list[_RowSpec]:
    nv, nu = _check_cards(cards)
    nx1, nx2 = src.x1.size, src.x2.size
    preimage = [tuple(int(y) for y in np.flatnonzero(src.f == x1)) for x1 in range(nx1)]
    if any(not p for p in preimage):
        raise RegionError("f is not onto X1; some source letters cannot be reproduced")
    return [
        _RowSpec(nx1, tuple(tuple(range(nv)) for _ in range(nx1)), nv),
        _RowSpec(nx2 * nv, tuple(tuple(range(nu)) for _ in range(nx2 * nv)), nu),
        _RowSpec(nx1 * nu * nv, tuple(preimage[x1] for x1 in range(nx1) for _ in range(nu * nv)),
                 src.y_alphabet.size),
    ]


def sample_wak_region(src: SourceSpec, search: SearchSpec, cards: Sequence[int]) -> RateRegionSample:
    """Bound records for every admissible candidate auxiliary, in candidate order."""
    nv, nu = _check_cards(cards)
    specs = wak_search_rows(src, cards)
    out, skipped = [], 0
    for k, (pv, pu, py) in enumerate(_iter_candidates(specs, search)):
        aux = WakAux.from_arrays(src, pv, pu.reshape(src.x2.size, nv, nu),
                                 py.reshape(src.x1.size, nu, nv, src.y_alphabet.size))
        p = compose_wak(src, aux)
        if wak_violations(src, aux, p, search.tv_tol):
            skipped += 1
            continue
        out.append(WakSample(k, aux, wak_bounds_from_joint(p), wak_corner_points_from_joint(p)))
    return RateRegionSample("wak", (nv, nu), tuple(out), skipped)


def bc_search_rows(ch: ChannelSpec, cards: Sequence[int]) -> list[_RowSpec]:
    nv, nu = _check_cards(cards)
    nx = ch.x_alphabet.size
    rows = []
    if ch.p_x is None:
        rows.append(_RowSpec(1, (tuple(range(nx)),), nx))
    rows.append(_RowSpec(nx, tuple(tuple(range(nv)) for _ in range(nx)), nv))
    rows.append(_RowSpec(nx * nv, tuple(tuple(range(nu)) for _ in range(nx * nv)), nu))
    return rows


def bc_aux_from_tables(ch: ChannelSpec, px, pv_x, pu_xv) -> BcAux:
    """Auxiliary from P(X), P(V|X) and P(U|X,V) tables."""
    nx = ch.x_alphabet.size
    px = np.asarray(px, float).reshape(nx)
    pv_x = np.asarray(pv_x, float).reshape(nx, -1)
    nv = pv_x.shape[1]
    pu_xv = np.asarray(pu_xv, float).reshape(nx, nv, -1)
    nu = pu_xv.shape[2]
    vux = np.einsum("x,xv,xvu->vux", px, pv_x, pu_xv)
    joint = JointPmf([Alphabet("V", nv), Alphabet("U", nu), ch.x_alphabet], vux)
    return BcAux.from_vux(joint, ch)


def sample_bc_region(ch: ChannelSpec, search: SearchSpec, cards: Sequence[int],
                     r12_grid: Sequence[float]) -> RateRegionSample:
    nv, nu = _check_cards(cards)
    r12_grid = tuple(float(r) for r in r12_grid)
    if not r12_grid or min(r12_grid) < 0:
        raise RegionError("cooperation-rate grid must be nonempty and nonnegative")
    specs = bc_search_rows(ch, cards)
    out = []
    for k, tables in enumerate(_iter_candidates(specs, search)):
        if ch.p_x is None:
            px, pv, pu = tables
            px = px[0]
        else:
            px = ch.p_x.values
            pv, pu = tables
        aux = bc_aux_from_tables(ch, px, pv, pu)
        p = compose_bc(ch, aux)
        out.append(BcSample(k, aux, tuple(bc_bounds_from_joint(p, r) for r in r12_grid),
                            bc_corner_points_from_joint(p)))
    return RateRegionSample("bc", (nv, nu), tuple(out), 0)


def region_dominates(big: RateRegionSample, small: RateRegionSample, tol: float = 1e-12) -> bool:
    """Every lower-bound record of ``small`` is matched or improved by one of ``big``."""
    return all(any(s.bounds.dominated_by(b.bounds, tol) for b in big.samples) for s in small.samples)


# --- constructions -------------------------------------------------------------

def _vux(ch: ChannelSpec, aux: BcAux) -> JointPmf:
    return marginalize(compose_bc(ch, aux), ("V", "U", "X"))


def gap_mix_param(ch: ChannelSpec, aux: BcAux, r12: float) -> MixParam:
    """Mixing probability that shrinks the gap I(V;Y1)-I(V;Y2) down to r12."""
    if r12 < 0:
        raise RegionError("cooperation rate must be nonnegative")
    m = InfoCalc(compose_bc(ch, aux))
    gap = m.I("V", "Y1") - m.I("V", "Y2")
    if r12 >= gap:
        return MixParam(1.0, 0.0, "unchanged")
    if gap <= 0:
        raise RegionError("mixing undefined: nonpositive gap")
    gamma = gap - r12
    return MixParam((gap - gamma) / gap, gamma, "mixed")


def time_share_auxiliary(vux: JointPmf, lam: float, keep: Sequence[str]) -> JointPmf:
    """New (V, U, X) joint with V = (Theta, kept part) and U = all original auxiliaries.

    With probability lam the new V reveals the ``keep`` coordinates; otherwise it
    takes the extra symbol that carries no information. Theta is independent of
    everything else.
    """
    aux_names = [n for n in vux.names if n != "X"]
    vux = vux.reorder(aux_names + ["X"])
    sizes = [vux.axis(n).size for n in aux_names]
    nx = vux.axis("X").size
    n_u = int(np.prod(sizes))
    keep_sizes = [vux.axis(n).size for n in keep]
    n_keep = int(np.prod(keep_sizes)) if keep else 1
    flat = vux.values.reshape(n_u, nx)
    grid = np.indices(sizes).reshape(len(sizes), -1)
    if keep:
        kidx = [aux_names.index(n) for n in keep]
        v_of_u = np.ravel_multi_index(tuple(grid[i] for i in kidx), keep_sizes)
    else:
        v_of_u = np.zeros(n_u, dtype=np.int64)
    out = np.zeros((n_keep + 1, n_u, nx))
    out[v_of_u, np.arange(n_u), :] = lam * flat
    out[n_keep, :, :] = (1 - lam) * flat
    return JointPmf([Alphabet("V", n_keep + 1), Alphabet("U", n_u), vux.axis("X")], out)


def mix_auxiliary_gap(aux: BcAux, ch: ChannelSpec, r12: float) -> BcAux:
    """Auxiliary whose gap I(V*;Y1)-I(V*;Y2) equals r12, keeping the other bounds.

    Returns ``aux`` unchanged when r12 already covers the gap.
    """
    param = gap_mix_param(ch, aux, r12)
    if param.branch == "unchanged":
        return aux
    vux = _vux(ch, aux)
    new = BcAux.from_vux(time_share_auxiliary(vux, param.lam, ["V"]), ch)
    m = InfoCalc(compose_bc(ch, new))
    resid = abs(m.I("V", "Y1") - m.I("V", "Y2") - r12)
    if resid > TOL:
        raise RegionError(f"mixed auxiliary misses the target gap by {resid:.3g}")
    return new


# converse construction over an arbitrary (A, B, C) triple

def converse_lambda_from_terms(i_a_y1_c: float, i_ac_y2: float, i_a_y2: float, i_c_y1: float) -> MixParam:
    """Mixing probability from the four information terms of the converse.

    Arguments are I(A;Y1|C), I(A,C;Y2), I(A;Y2) and I(C;Y1).
    """
    den = i_a_y1_c - i_ac_y2 + i_c_y1  # equals I(A,C;Y1) - I(A,C;Y2)
    if den <= 0:
        return MixParam(1.0, 0.0, "nonpositive_gap")
    num = i_a_y1_c - i_ac_y2 + i_a_y2
    ratio = num / den
    if ratio >= 1:
        return MixParam(1.0, 0.0, "min_clause")
    lam = _pos(ratio)
    return MixParam(lam, (1 - lam) * den, "formula" if ratio > 0 else "clamped_zero")


def converse_lambda(joint: JointPmf) -> MixParam:
    """joint has axes including A, B, C, Y1, Y2."""
    m = InfoCalc(joint)
    if m.I(("A", "C"), "Y1") - m.I(("A", "C"), "Y2") <= 0:
        return MixParam(1.0, 0.0, "nonpositive_gap")
    den = m.I("A", "Y1", "C") - m.I(("A", "C"), "Y2") + m.I("C", "Y1")
    if den <= 0:
        raise RegionError("converse mixing denominator vanishes with a positive gap")
    return converse_lambda_from_terms(m.I("A", "Y1", "C"), m.I(("A", "C"), "Y2"), m.I("A", "Y2"), m.I("C", "Y1"))


@dataclass(frozen=True)
class OuterBounds:
    lo_r12: float
    r1_max: float
    i_b_y2_a: float
    sum_max: float

    def r2_max(self, r12: float) -> float:
        return self.i_b_y2_a + r12


def converse_outer_bounds(joint: JointPmf) -> OuterBounds:
    m = InfoCalc(joint)
    return OuterBounds(
        lo_r12=m.I("A", "Y1", "C") - m.I("C", "Y2", "A"),
        r1_max=m.H("Y1", ("B", "C")),
        i_b_y2_a=m.I("B", "Y2", "A"),
        sum_max=m.H("Y1", ("A", "B", "C")) + m.I("B", "Y2", ("A", "C")) + m.I("A", "Y1", "C"),
    )


def channel_joint(abcx: JointPmf, ch: ChannelSpec) -> JointPmf:
    """Append Y1 = f(X) and Y2 ~ P(Y2|X) to a PMF containing X."""
    return compose(compose(abcx, ch.y1_conditional()), ch.noisy)


def converse_construct_vu(abcx: JointPmf, ch: ChannelSpec) -> tuple[BcAux, MixParam]:
    """(V, U) = ((Theta, (A, C) or nothing), (A, B, C)) with the converse mixing probability."""
    abcx = abcx.reorder(("A", "B", "C", "X"))
    param = converse_lambda(channel_joint(abcx, ch))
    vux = time_share_auxiliary(abcx, param.lam, ["A", "C"])
    return BcAux.from_vux(vux, ch), param


@dataclass(frozen=True)
class InclusionReport:
    param: MixParam
    checked: int
    violations: tuple


def converse_inclusion(abcx: JointPmf, ch: ChannelSpec, r12_values: Sequence[float],
                       tol: float = TOL) -> InclusionReport:
    """Check that every vertex of the outer polytope lies in the alternative region.

    For each cooperation rate at or above the outer lower bound, vertices of the
    outer (R1, R2) polygon are tested against the alternative bounds evaluated
    on the constructed auxiliary.
    """
    outer = converse_outer_bounds(channel_joint(abcx, ch))
    aux, param = converse_construct_vu(abcx, ch)
    alt = bc_alt_bounds(ch, aux)
    bad, checked = [], 0
    for r12 in r12_values:
        if r12 < max(0.0, outer.lo_r12):
            continue
        for r1, r2 in polygon_vertices(outer.r1_max, outer.r2_max(r12), outer.sum_max):
            pt = RatePoint(r12, r1, r2)
            checked += 1
            for why in alt.failing(pt, tol):
                bad.append((pt.as_tuple(), why))
    return InclusionReport(param, checked, tuple(bad))


# --- special cases -------------------------------------------------------------

@dataclass(frozen=True)
class DbcBounds:
    r12: float
    r1_max: float
    r2_max: float
    sum_max: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r1_max, self.r2_max, self.sum_max)


def dbc_bounds(ch: ChannelSpec, p_x: JointPmf, r12: float = 0.0) -> DbcBounds:
    if not ch.is_deterministic():
        raise RegionError("both outputs must be deterministic")
    p = compose(compose(p_x, ch.y1_conditional()), ch.noisy)
    m = InfoCalc(p)
    return DbcBounds(r12, m.H("Y1"), m.H("Y2") + r12, m.H(("Y1", "Y2")))


@dataclass(frozen=True)
class SwBounds:
    r12: float
    lo_r1: float
    lo_r2: float
    lo_sum: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lo_r1, self.lo_r2, self.lo_sum)


def sw_bounds(src: SourceSpec, r12: float = 0.0) -> SwBounds:
    if not src.is_identity_map():
        raise RegionError("lossless reproduction needs the identity map Y = X1")
    m = InfoCalc(src.joint)
    return SwBounds(r12, _pos(m.H("X1", "X2") - r12), m.H("X2", "X1"), m.H(("X1", "X2")))


@dataclass(frozen=True, eq=False)
class SwConstruction:
    param: MixParam
    aux: WakAux
    r12: float
    residual: float


def sw_lambda(src: SourceSpec, gamma: float) -> SwConstruction:
    """Auxiliary V with I(V;X1|X2) = H(X1|X2) - gamma, using U = X2 and Y = X1."""
    if not src.is_identity_map():
        raise RegionError("lossless reproduction needs the identity map Y = X1")
    m = InfoCalc(src.joint)
    h = m.H("X1", "X2")
    if gamma < 0 or gamma > h + TOL:
        raise RegionError(f"gamma must lie in [0, H(X1|X2)] = [0, {h:.6g}]")
    if h <= 0:
        lam = 1.0
    else:
        lam = (h - gamma) / h
    n1, n2 = src.x1.size, src.x2.size
    pv = np.zeros((n1, n1 + 1))
    pv[np.arange(n1), np.arange(n1)] = lam
    pv[:, n1] = 1 - lam
    nv = n1 + 1
    pu = np.zeros((n2, nv, n2))
    for x2 in range(n2):
        pu[x2, :, x2] = 1.0
    py = np.zeros((n1, n2, nv, n1))
    for x1 in range(n1):
        py[x1, :, :, x1] = 1.0
    aux = WakAux.from_arrays(src, pv, pu, py)
    r12 = h - gamma
    got = InfoCalc(compose_wak(src, aux)).I("V", "X1", "X2")
    return SwConstruction(MixParam(lam, gamma, "sw"), aux, r12, abs(got - r12))


@dataclass(frozen=True)
class PdbcBounds:
    r12: float
    r1_max: float
    r2_max: float
    sum_max: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r1_max, self.r2_max, self.sum_max)


def _pd_joint(ch: ChannelSpec, ux: JointPmf) -> JointPmf:
    return compose(ux.reorder(("U", "X")), ch.noisy)


def pdbc_bounds(ch: ChannelSpec, ux: JointPmf, r12: float = 0.0) -> PdbcBounds:
    """Three bounds (H(X|U), I(U;Y2)+R12, H(X)) when the first receiver sees X."""
    m = InfoCalc(_pd_joint(ch, ux))
    return PdbcBounds(r12, m.H("X", "U"), m.I("U", "Y2") + r12, m.H("X"))


def pdbc_two_bound(ch: ChannelSpec, ux: JointPmf, r12: float = 0.0) -> PdbcBounds:
    """Variant with no individual bound on R1 (r1_max is reported as H(X))."""
    m = InfoCalc(_pd_joint(ch, ux))
    hx = m.H("X")
    return PdbcBounds(r12, hx, m.I("U", "Y2") + r12, hx)


def pdbc_from_capacity_region(ch: ChannelSpec, ux: JointPmf, r12: float = 0.0) -> BcBounds:
    """Capacity-region bounds with Y1 = X, a constant second auxiliary and V := U."""
    ux = ux.reorder(("U", "X"))
    nu = ux.axis("U").size
    vux = JointPmf([Alphabet("V", nu), Alphabet("U", 1), ch.x_alphabet], ux.values.reshape(nu, 1, -1))
    return bc_bounds(ch, BcAux.from_vux(vux, ch), r12)


def frontier(records: Sequence[tuple[float, float, float]], r1_grid: Sequence[float]) -> np.ndarray:
    """max R2 over the union of {r1 <= a, r2 <= b, r1 + r2 <= c} at each R1 (-inf if none)."""
    out = np.full(len(r1_grid), -np.inf)
    for a, b, c in records:
        for i, r1 in enumerate(r1_grid):
            if r1 <= a + TOL:
                top = min(b, c - r1)
                if top >= -TOL:
                    out[i] = max(out[i], max(top, 0.0))
    return out


def pd_frontier_gap(ch: ChannelSpec, ux_list: Sequence[JointPmf], r12: float,
                    r1_grid: Sequence[float]) -> float:
    """Largest frontier difference between the two-bound and three-bound forms."""
    three = [pdbc_bounds(ch, ux, r12).as_tuple() for ux in ux_list]
    two = [pdbc_two_bound(ch, ux, r12).as_tuple() for ux in ux_list]
    f3 = frontier(three, r1_grid)
    f2 = frontier(two, r1_grid)
    both = np.isfinite(f2) & np.isfinite(f3)
    gap = np.abs(f2[both] - f3[both]).max() if both.any() else 0.0
    if np.any(np.isfinite(f2) != np.isfinite(f3)):
        return float("inf")
    return float(gap)


@dataclass(frozen=True)
class RbcBounds:
    r1_max: float
    r2_max: float
    sum_max_a: float
    sum_max_b: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r1_max, self.r2_max, self.sum_max_a, self.sum_max_b)


def rbc_reduced_bounds(joint: JointPmf) -> RbcBounds:
    """Bounds for the relay-cooperation model over (V, U, X, X1, Y21, Y22, Y1)."""
    m = InfoCalc(joint)
    h_y1_vux1 = m.H("Y1", ("V", "U", "X1"))
    i_vux1_y21 = m.I(("V", "U", "X1"), "Y21")
    h_y22_y21 = m.H("Y22", "Y21")
    return RbcBounds(
        r1_max=m.H("Y1", "X1"),
        r2_max=i_vux1_y21 + h_y22_y21,
        sum_max_a=h_y1_vux1 + m.I("U", "Y21", ("V", "X1")) + m.I("V", "Y1", "X1"),
        sum_max_b=h_y1_vux1 + i_vux1_y21 + h_y22_y21,
    )


def rbc_joint(vux: JointPmf, ch: ChannelSpec, p_x1: JointPmf, f_relay, y22_size: int) -> JointPmf:
    """Relay-cooperation joint with X1 independent of (V, U, X) and Y22 = f_relay(X1)."""
    if p_x1.names != ("X1",):
        raise RegionError("relay input PMF must be over X1")
    p = compose(vux.reorder(("V", "U", "X")), ch.y1_conditional())
    p = compose(p, ConditionalPmf([Alphabet("Y21", ch.y2_alphabet.size)], [ch.x_alphabet], ch.noisy.table))
    p = JointPmf(p.axes + p_x1.axes, np.multiply.outer(p.values, p_x1.values), check=False)
    return compose(p, deterministic_conditional(Alphabet("Y22", y22_size), p_x1.axes, f_relay))
