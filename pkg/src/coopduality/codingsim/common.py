"""Configuration, reports and sequence helpers shared by the simulators."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from ..probability import JointPmf, marginalize, typical_count_bounds
from . import kernels

DEFAULT_CAP = 1 << 20
SYMBOL_BUDGET = 1 << 27  # total stored codeword symbols per run


class SimConfigError(ValueError):
    """Infeasible rates, oversized codebooks or an invalid auxiliary."""


@dataclass(frozen=True)
class SimConfig:
    n: int
    trials: int
    eps: float = 0.1
    seed: int = 0
    theta: float = 0.5
    codebook_cap: int = DEFAULT_CAP
    allow_infeasible: bool = False
    r12: float | None = None
    rates: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.trials < 1:
            raise SimConfigError("n and trials must be at least 1")
        if self.eps < 0:
            raise SimConfigError("eps must be nonnegative")
        if self.theta <= 0:
            raise SimConfigError("theta must be positive")
        if self.theta > 1 and not self.allow_infeasible:
            raise SimConfigError(f"theta = {self.theta} > 1 puts the rates outside the achievable bounds")
        if self.r12 is not None and self.r12 < 0:
            raise SimConfigError("cooperation rate must be nonnegative")


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class TrialReport:
    scheme: str
    n: int
    theta: float
    seed: int
    trials: int
    errors_overall: int
    errors_dec1: int
    errors_dec2: int
    mean_tv: float
    tv_std: float
    stage_failures: Mapping[str, int]
    rates: Mapping[str, float] = field(default_factory=dict)

    @property
    def error_rate_overall(self) -> float:
        return self.errors_overall / self.trials

    @property
    def error_rate_dec1(self) -> float:
        return self.errors_dec1 / self.trials

    @property
    def error_rate_dec2(self) -> float:
        return self.errors_dec2 / self.trials

    def stage_rate(self, stage: str) -> float:
        return self.stage_failures[stage] / self.trials

    def union_bound_holds(self) -> bool:
        return self.errors_overall <= sum(self.stage_failures.values())

    def wilson(self, which: str = "overall") -> tuple[float, float]:
        k = {"overall": self.errors_overall, "dec1": self.errors_dec1, "dec2": self.errors_dec2}[which]
        return wilson_interval(k, self.trials)

    def tv_interval(self, z: float = 1.959963984540054) -> tuple[float, float]:
        half = z * self.tv_std / math.sqrt(self.trials)
        return self.mean_tv - half, self.mean_tv + half


REPORT_COLUMNS = ("scheme", "n", "theta", "seed", "trials", "error_rate_overall", "error_rate_dec1",
                  "error_rate_dec2", "mean_tv", "tv_std")


def reports_to_csv(reports: Sequence[TrialReport]) -> str:
    """Wide CSV, one row per report; stage counts and rates appended in a stable order."""
    stages = sorted({s for r in reports for s in r.stage_failures})
    rate_names = sorted({s for r in reports for s in r.rates})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(REPORT_COLUMNS) + [f"fail_{s}" for s in stages] + [f"rate_{s}" for s in rate_names])
    for r in reports:
        w.writerow([r.scheme, r.n, repr(float(r.theta)), r.seed, r.trials, repr(r.error_rate_overall),
                    repr(r.error_rate_dec1), repr(r.error_rate_dec2), repr(r.mean_tv), repr(r.tv_std)]
                   + [r.stage_failures.get(s, "") for s in stages]
                   + [repr(float(r.rates[s])) if s in r.rates else "" for s in rate_names])
    return buf.getvalue()


def stages_to_long_csv(reports: Sequence[TrialReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "n", "theta", "seed", "stage", "failures", "rate"])
    for r in reports:
        for s, k in r.stage_failures.items():
            w.writerow([r.scheme, r.n, repr(float(r.theta)), r.seed, s, k, repr(k / r.trials)])
    return buf.getvalue()


# --- sequences ----------------------------------------------------------------

def mixed_code(arrays: Sequence[np.ndarray], sizes: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of aligned symbol arrays (first array most significant)."""
    out = np.asarray(arrays[0], dtype=np.int64)
    for arr, size in zip(arrays[1:], sizes[1:]):
        out = out * size + np.asarray(arr, dtype=np.int64)
    return out


class TypicalityRef:
    """Letter-typicality test against a PMF, on aligned integer sequences.

    ``codes(a, b, ...)`` maps per-axis symbol arrays (broadcastable, last axis n)
    to flat joint-symbol indices in the order of ``names``.
    """

    def __init__(self, p: JointPmf, names: Sequence[str], n: int, eps: float):
        ref = marginalize(p, names).reorder(tuple(names))
        self.names = tuple(names)
        self.sizes = ref.shape
        self.lo, self.hi = typical_count_bounds(ref.values, n, eps)

    def codes(self, *arrays: np.ndarray) -> np.ndarray:
        if len(arrays) != len(self.sizes):
            raise ValueError("one array per axis expected")
        return mixed_code(arrays, self.sizes)

    def mask(self, *arrays: np.ndarray) -> np.ndarray:
        c = self.codes(*arrays)
        shape = c.shape
        return kernels.typical_mask(c.reshape(-1, shape[-1]), self.lo, self.hi).reshape(shape[:-1])

    def check(self, *arrays: np.ndarray) -> bool:
        return bool(self.mask(*arrays).reshape(-1)[0])

    def pair(self, a_arrays: Sequence[np.ndarray], b_array: np.ndarray) -> np.ndarray:
        """Mask [M1, M2]: rows of the leading axes paired with rows of the last axis."""
        a = mixed_code(a_arrays, self.sizes[:-1])
        return kernels.pair_mask(a, np.asarray(b_array, dtype=np.int64), self.sizes[-1], self.lo, self.hi)


def draw_iid(rng: np.random.Generator, probs: np.ndarray, shape) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, float).reshape(-1))
    idx = np.searchsorted(cdf, rng.random(shape), side="right")
    return np.minimum(idx, cdf.size - 1).astype(np.int64)


def draw_conditional(rng: np.random.Generator, rows: np.ndarray, given: np.ndarray) -> np.ndarray:
    """One draw per entry of ``given`` from row ``rows[given]``."""
    cdf = np.cumsum(np.asarray(rows, float), axis=1)
    u = rng.random(given.shape)
    idx = (u[..., None] >= cdf[given]).sum(axis=-1)
    return np.minimum(idx, rows.shape[1] - 1).astype(np.int64)


def empirical_tv(target: np.ndarray, *seqs: np.ndarray) -> float:
    """TV between the joint type of aligned sequences and a target table."""
    sizes = target.shape
    code = mixed_code(seqs, sizes)
    counts = np.bincount(code, minlength=int(np.prod(sizes))) / code.size
    return 0.5 * float(np.abs(counts - target.reshape(-1)).sum())


def codebook_size(rate: float, n: int) -> int:
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


def check_size(label: str, count: int, cap: int) -> None:
    if count > cap:
        raise SimConfigError(f"codebook {label} needs {count} codewords, above the cap {cap}")


def permutation_bins(rng: np.random.Generator, count: int, bins: int) -> np.ndarray:
    """Uniform random partition of ``count`` items into ``bins`` near-equal bins.

    More bins than items gives singletons; labels are then capped at ``count``.
    """
    return (rng.permutation(count) % min(bins, count)).astype(np.int64)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1, trial])


def codebook_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, *key])
