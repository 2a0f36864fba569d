"""Typicality search primitives: unique decoding and covering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..probability import JointPmf
from .common import TypicalityRef

OK, NONE, AMBIGUOUS = "ok", "none", "ambiguous"


@dataclass(frozen=True)
class DecodeResult:
    """``index`` is the unique match, or a fallback guess when ``status`` is not ok."""

    index: int | None
    status: str

    @property
    def ok(self) -> bool:
        return self.status == OK


def unique_from_mask(mask: np.ndarray, fallback: int | None = 0, singleton_ok: bool = True) -> DecodeResult:
    """Decode outcome from a candidate mask.

    With ``singleton_ok`` a one-element candidate set is returned without a test:
    the index carries all the information and nothing is left to disambiguate.
    """
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if mask.size == 0:
        return DecodeResult(None, NONE)
    if singleton_ok and mask.size == 1:
        return DecodeResult(0, OK)
    hits = np.flatnonzero(mask)
    if hits.size == 1:
        return DecodeResult(int(hits[0]), OK)
    if hits.size == 0:
        return DecodeResult(fallback, NONE)
    return DecodeResult(int(hits[0]), AMBIGUOUS)


def typicality_decode(codebook: np.ndarray, received: np.ndarray | Sequence[np.ndarray], p_ref: JointPmf,
                      eps: float) -> DecodeResult:
    """Unique index i with (codebook[i], received...) typical for ``p_ref``.

    ``p_ref`` axes are read in order: the codeword axis first, then one axis per
    received sequence. Every candidate is tested, including a lone one.
    """
    codebook = np.asarray(codebook, dtype=np.int64)
    if codebook.ndim != 2:
        raise ValueError("codebook must be a 2-D array [codewords, n]")
    if isinstance(received, np.ndarray) and received.ndim == 1:
        received = [received]
    received = [np.asarray(r, dtype=np.int64) for r in received]
    if len(received) + 1 != len(p_ref.names):
        raise ValueError("p_ref needs one axis for the codeword and one per received sequence")
    if codebook.shape[0] == 0:
        return DecodeResult(None, NONE)
    n = codebook.shape[1]
    ref = TypicalityRef(p_ref, p_ref.names, n, eps)
    mask = ref.mask(codebook, *[r[None, :] for r in received])
    return unique_from_mask(mask, fallback=None, singleton_ok=False)


@dataclass(frozen=True)
class CoverResult:
    pair: tuple[int, int]
    found: bool
    candidates: int


def covering_search(mask: np.ndarray, rng: np.random.Generator) -> CoverResult:
    """Uniform choice among typical (i1, i2) pairs; uniform over all pairs when none is typical."""
    mask = np.asarray(mask, dtype=bool)
    m1, m2 = mask.shape
    hits = np.flatnonzero(mask.reshape(-1))
    if hits.size:
        k = int(hits[rng.integers(hits.size)])
        return CoverResult((k // m2, k % m2), True, int(hits.size))
    k = int(rng.integers(m1 * m2))
    return CoverResult((k // m2, k % m2), False, 0)


def first_match(mask: np.ndarray) -> tuple[int, bool]:
    """Lowest index with a True entry, or (0, False)."""
    hits = np.flatnonzero(np.asarray(mask, dtype=bool).reshape(-1))
    if hits.size:
        return int(hits[0]), True
    return 0, False
