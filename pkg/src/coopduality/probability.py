"""Finite-alphabet PMFs and the information measures built on them.

All logarithms are base 2. A joint PMF is a dense array with one named axis per
random variable; every measure accepts axis names, never positional indices.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from typing import Iterable, Sequence as Seq

import numpy as np

NORM_TOL = 1e-9
MI_CLAMP_TOL = 1e-9


class PmfError(ValueError):
    """Raised for malformed PMFs or inconsistent axis usage."""


@dataclass(frozen=True)
class Alphabet:
    name: str
    size: int

    def __post_init__(self) -> None:
        if not self.name:
            raise PmfError("alphabet name must be nonempty")
        if self.size < 1:
            raise PmfError(f"alphabet {self.name!r} must have size >= 1")


def _names(axes: Iterable[Alphabet]) -> tuple[str, ...]:
    return tuple(a.name for a in axes)


def _as_names(axes: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(axes, str):
        return (axes,)
    return tuple(axes)


class JointPmf:
    """Joint PMF over named axes. Values are nonnegative and sum to one."""

    __slots__ = ("axes", "values", "_index")

    def __init__(self, axes: Seq[Alphabet], values, *, check: bool = True) -> None:
        axes = tuple(axes)
        names = _names(axes)
        if len(set(names)) != len(names):
            raise PmfError(f"duplicate axis names in {names}")
        arr = np.asarray(values, dtype=float)
        shape = tuple(a.size for a in axes)
        if arr.shape != shape:
            try:
                arr = arr.reshape(shape)
            except ValueError as exc:
                raise PmfError(f"values of shape {arr.shape} do not fit axes {shape}") from exc
        if check:
            if np.any(arr < -NORM_TOL) or not np.all(np.isfinite(arr)):
                raise PmfError("PMF has negative or non-finite entries")
            total = float(arr.sum())
            if abs(total - 1.0) > NORM_TOL:
                raise PmfError(f"PMF sums to {total!r}, expected 1")
            arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        self.axes = axes
        self.values = arr
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def names(self) -> tuple[str, ...]:
        return _names(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def axis(self, name: str) -> Alphabet:
        return self.axes[self.position(name)]

    def position(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise PmfError(f"unknown axis {name!r}; have {self.names}") from None

    def rename(self, mapping: dict[str, str]) -> "JointPmf":
        axes = [Alphabet(mapping.get(a.name, a.name), a.size) for a in self.axes]
        return JointPmf(axes, self.values, check=False)

    def reorder(self, names: Seq[str]) -> "JointPmf":
        names = tuple(names)
        if sorted(names) != sorted(self.names):
            raise PmfError(f"reorder needs a permutation of {self.names}, got {names}")
        perm = [self.position(n) for n in names]
        return JointPmf([self.axes[i] for i in perm], np.transpose(self.values, perm), check=False)

    def __repr__(self) -> str:
        dims = ", ".join(f"{a.name}:{a.size}" for a in self.axes)
        return f"JointPmf({dims})"


class ConditionalPmf:
    """P(target | given) stored as an array of shape given_sizes + target_sizes."""

    __slots__ = ("target_axes", "given_axes", "table")

    def __init__(self, target_axes: Seq[Alphabet], given_axes: Seq[Alphabet], table) -> None:
        self.target_axes = tuple(target_axes)
        self.given_axes = tuple(given_axes)
        if not self.target_axes:
            raise PmfError("conditional PMF needs at least one target axis")
        all_names = _names(self.target_axes) + _names(self.given_axes)
        if len(set(all_names)) != len(all_names):
            raise PmfError(f"target and given axes overlap or repeat: {all_names}")
        shape = tuple(a.size for a in self.given_axes) + tuple(a.size for a in self.target_axes)
        arr = np.asarray(table, dtype=float)
        try:
            arr = arr.reshape(shape)
        except ValueError as exc:
            raise PmfError(f"table of shape {arr.shape} does not fit {shape}") from exc
        if np.any(arr < -NORM_TOL) or not np.all(np.isfinite(arr)):
            raise PmfError("conditional PMF has negative or non-finite entries")
        k = len(self.target_axes)
        sums = arr.reshape(arr.shape[: arr.ndim - k] + (-1,)).sum(axis=-1)
        bad = np.abs(sums - 1.0) > NORM_TOL
        if np.any(bad):
            row = tuple(int(i) for i in np.argwhere(bad)[0])
            raise PmfError(f"conditional row {row} sums to {float(sums[row])!r}")
        arr = np.clip(arr, 0.0, None)
        arr.setflags(write=False)
        self.table = arr

    @property
    def target_names(self) -> tuple[str, ...]:
        return _names(self.target_axes)

    @property
    def given_names(self) -> tuple[str, ...]:
        return _names(self.given_axes)

    def rows(self) -> np.ndarray:
        """Table flattened to (prod given sizes, prod target sizes)."""
        n_given = int(np.prod([a.size for a in self.given_axes], dtype=np.int64))
        return self.table.reshape(n_given, -1)

    def __repr__(self) -> str:
        t = ",".join(self.target_names)
        g = ",".join(self.given_names)
        return f"ConditionalPmf({t}|{g})"


def deterministic_conditional(target: Alphabet, given: Seq[Alphabet], mapping) -> ConditionalPmf:
    """Point-mass conditional target = mapping[given...] (mapping indexed row-major)."""
    given = tuple(given)
    mapping = np.asarray(mapping, dtype=np.int64).reshape(-1)
    n_rows = int(np.prod([a.size for a in given], dtype=np.int64))
    if mapping.size != n_rows:
        raise PmfError(f"map has {mapping.size} entries, expected {n_rows}")
    if np.any(mapping < 0) or np.any(mapping >= target.size):
        raise PmfError(f"map values out of range for alphabet {target.name!r}")
    table = np.zeros((n_rows, target.size))
    table[np.arange(n_rows), mapping] = 1.0
    return ConditionalPmf([target], given, table)


@dataclass(frozen=True, eq=False)
class Sequence:
    """A length-n sequence over one alphabet, stored as integer symbols."""

    alphabet: Alphabet
    symbols: np.ndarray

    def __post_init__(self) -> None:
        sym = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        if sym.size and (sym.min() < 0 or sym.max() >= self.alphabet.size):
            raise PmfError(f"symbols out of range for alphabet {self.alphabet.name!r}")
        object.__setattr__(self, "symbols", sym)

    def __len__(self) -> int:
        return int(self.symbols.size)


def _einsum_letters(count: int) -> str:
    letters = string.ascii_letters
    if count > len(letters):
        raise PmfError("too many axes for einsum composition")
    return letters[:count]


def marginalize(p: JointPmf, keep: str | Iterable[str]) -> JointPmf:
    keep = _as_names(keep)
    if len(set(keep)) != len(keep):
        raise PmfError(f"repeated axis in {keep}")
    pos = [p.position(n) for n in keep]
    drop = tuple(i for i in range(len(p.axes)) if i not in pos)
    vals = p.values.sum(axis=drop) if drop else p.values
    # summed axes are removed in order; restore the requested order
    remaining = [i for i in range(len(p.axes)) if i in pos]
    perm = [remaining.index(i) for i in pos]
    vals = np.transpose(vals, perm) if vals.ndim else vals
    return JointPmf([p.axes[i] for i in pos], vals, check=False)


def compose(base: JointPmf, cond: ConditionalPmf) -> JointPmf:
    """Joint of base and cond, i.e. P(base) P(target | given), targets appended."""
    for name in cond.target_names:
        if name in base._index:
            raise PmfError(f"axis collision: {name!r} already in base PMF")
    for a in cond.given_axes:
        if base.axis(a.name).size != a.size:
            raise PmfError(f"size mismatch on conditioning axis {a.name!r}")
    letters = _einsum_letters(len(base.axes) + len(cond.target_axes))
    base_l = letters[: len(base.axes)]
    tgt_l = letters[len(base.axes):]
    given_l = "".join(base_l[base.position(n)] for n in cond.given_names)
    vals = np.einsum(f"{base_l},{given_l}{tgt_l}->{base_l}{tgt_l}", base.values, cond.table)
    return JointPmf(base.axes + cond.target_axes, vals, check=False)


def _plogp_sum(vals: np.ndarray) -> float:
    nz = vals[vals > 0]
    return float(-(nz * np.log2(nz)).sum())


def entropy(p: JointPmf, axes: str | Iterable[str]) -> float:
    axes = _as_names(axes)
    if not axes:
        raise PmfError("entropy needs a nonempty axis set")
    return _plogp_sum(marginalize(p, axes).values)


def _entropy_or_zero(p: JointPmf, axes: tuple[str, ...]) -> float:
    return entropy(p, axes) if axes else 0.0


def conditional_entropy(p: JointPmf, a: str | Iterable[str], given: str | Iterable[str] = ()) -> float:
    a, given = _as_names(a), _as_names(given)
    if set(a) & set(given):
        raise PmfError("conditional entropy subsets overlap")
    return entropy(p, a + given) - _entropy_or_zero(p, given)


def mutual_information(p: JointPmf, a: str | Iterable[str], b: str | Iterable[str],
                       cond: str | Iterable[str] = ()) -> float:
    """I(A;B|C) in bits, small negative rounding clamped to zero."""
    a, b, c = _as_names(a), _as_names(b), _as_names(cond)
    if not a or not b:
        raise PmfError("mutual information needs nonempty A and B")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise PmfError(f"overlapping subsets in I({a};{b}|{c})")
    val = entropy(p, a + c) + entropy(p, b + c) - entropy(p, a + b + c) - _entropy_or_zero(p, c)
    if -MI_CLAMP_TOL < val < 0.0:
        return 0.0
    return val


def total_variation(p: JointPmf, q: JointPmf) -> float:
    if p.names != q.names or p.shape != q.shape:
        if sorted(p.names) == sorted(q.names):
            q = q.reorder(p.names)
            if q.shape != p.shape:
                raise PmfError("axis sizes differ")
        else:
            raise PmfError(f"axis mismatch: {p.names} vs {q.names}")
    return 0.5 * float(np.abs(p.values - q.values).sum())


def _stack(seqs: Seq[Sequence]) -> tuple[tuple[Alphabet, ...], np.ndarray]:
    if not seqs:
        raise PmfError("need at least one sequence")
    n = len(seqs[0])
    if any(len(s) != n for s in seqs):
        raise PmfError("sequences have different lengths")
    if n == 0:
        raise PmfError("sequences are empty")
    return tuple(s.alphabet for s in seqs), np.stack([s.symbols for s in seqs])


def empirical_counts(seqs: Seq[Sequence]) -> tuple[tuple[Alphabet, ...], np.ndarray]:
    axes, sym = _stack(seqs)
    shape = tuple(a.size for a in axes)
    flat = np.ravel_multi_index(tuple(sym), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    return axes, counts


def empirical_pmf(seqs: Seq[Sequence]) -> JointPmf:
    """Joint type of aligned sequences."""
    axes, counts = empirical_counts(seqs)
    return JointPmf(axes, counts / counts.sum(), check=False)


def typical_count_bounds(pmf_values: np.ndarray, n: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer count range per cell for letter typicality |c/n - P| <= eps P.

    The float slack absorbs rounding so that exact-type sequences stay typical at eps=0.
    """
    if eps < 0:
        raise PmfError("eps must be nonnegative")
    p = np.asarray(pmf_values, dtype=float).reshape(-1)
    slack = 1e-9
    lo = np.ceil(n * p * (1.0 - eps) - slack)
    hi = np.floor(n * p * (1.0 + eps) + slack)
    lo = np.maximum(lo, 0)
    zero = p <= 0.0
    lo[zero] = 0
    hi[zero] = 0
    return lo.astype(np.int64), hi.astype(np.int64)


def is_typical(seqs: Seq[Sequence], p: JointPmf, eps: float) -> bool:
    """Letter typicality of the joint type of seqs with respect to p."""
    axes, counts = empirical_counts(seqs)
    names = _names(axes)
    if sorted(names) != sorted(p.names):
        raise PmfError(f"sequence axes {names} do not match PMF axes {p.names}")
    ref = p.reorder(names)
    if ref.shape != counts.shape:
        raise PmfError("sequence alphabets do not match PMF alphabets")
    n = len(seqs[0])
    lo, hi = typical_count_bounds(ref.values, n, eps)
    c = counts.reshape(-1)
    return bool(np.all((c >= lo) & (c <= hi)))


def verify_markov_numeric(p: JointPmf, a, b, c, tol: float = 1e-9) -> bool:
    """True iff A - C - B holds numerically, i.e. I(A;B|C) <= tol."""
    return mutual_information(p, a, b, c) <= tol


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def random_joint(rng: np.random.Generator, axes: Seq[Alphabet], concentration: float = 1.0) -> JointPmf:
    shape = tuple(a.size for a in axes)
    vals = rng.dirichlet(np.full(int(np.prod(shape)), concentration))
    return JointPmf(axes, vals.reshape(shape))


def random_conditional(rng: np.random.Generator, target: Seq[Alphabet], given: Seq[Alphabet],
                       concentration: float = 1.0) -> ConditionalPmf:
    n_rows = int(np.prod([a.size for a in given], dtype=np.int64))
    n_cols = int(np.prod([a.size for a in target], dtype=np.int64))
    rows = rng.dirichlet(np.full(n_cols, concentration), size=n_rows)
    return ConditionalPmf(target, given, rows)


def uniform_joint(axes: Seq[Alphabet]) -> JointPmf:
    shape = tuple(a.size for a in axes)
    return JointPmf(axes, np.full(shape, 1.0 / int(np.prod(shape))))


class InfoCalc:
    """Memoized entropies of one joint PMF; same conventions as the free functions."""

    def __init__(self, p: JointPmf) -> None:
        self.p = p
        self._h: dict[frozenset, float] = {frozenset(): 0.0}

    def _joint(self, names: Iterable[str]) -> float:
        key = frozenset(names)
        val = self._h.get(key)
        if val is None:
            val = entropy(self.p, sorted(key))
            self._h[key] = val
        return val

    def H(self, a: str | Iterable[str], given: str | Iterable[str] = ()) -> float:
        a, given = _as_names(a), _as_names(given)
        if not a:
            raise PmfError("entropy needs a nonempty axis set")
        if set(a) & set(given):
            raise PmfError("conditional entropy subsets overlap")
        return self._joint(a + given) - self._joint(given)

    def I(self, a: str | Iterable[str], b: str | Iterable[str], given: str | Iterable[str] = ()) -> float:
        a, b, c = _as_names(a), _as_names(b), _as_names(given)
        if not a or not b:
            raise PmfError("mutual information needs nonempty A and B")
        if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
            raise PmfError(f"overlapping subsets in I({a};{b}|{c})")
        val = self._joint(a + c) + self._joint(b + c) - self._joint(a + b + c) - self._joint(c)
        if -MI_CLAMP_TOL < val < 0.0:
            return 0.0
        return val
