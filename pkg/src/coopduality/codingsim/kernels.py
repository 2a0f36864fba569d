"""Typicality kernels over flat joint-symbol codes.

A row of ``codes`` holds, per position, the index of the joint symbol in the
flattened reference PMF. A row is letter-typical when every cell count lies in
``[lo[k], hi[k]]``. Both backends work on integer counts, so they agree bit for bit.

Set ``COOPDUALITY_NO_NUMBA=1`` to force the pure-numpy backend.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by whichever backend loads
    import numba
except ImportError:  # pragma: no cover
    numba = None

ENV_FLAG = "COOPDUALITY_NO_NUMBA"


def _numpy_typical_mask(codes: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    m, _ = codes.shape
    k = lo.shape[0]
    if m == 0:
        return np.zeros(0, dtype=np.bool_)
    flat = (codes + (np.arange(m, dtype=np.int64) * k)[:, None]).ravel()
    counts = np.bincount(flat, minlength=m * k).reshape(m, k)
    return np.all((counts >= lo) & (counts <= hi), axis=1)


def _numpy_pair_mask(a: np.ndarray, b: np.ndarray, mult: int, lo: np.ndarray, hi: np.ndarray,
                     chunk: int = 1 << 16) -> np.ndarray:
    m1, n = a.shape
    m2 = b.shape[0]
    out = np.zeros((m1, m2), dtype=np.bool_)
    if m1 == 0 or m2 == 0:
        return out
    rows = max(1, chunk // max(m2, 1))
    for s in range(0, m1, rows):
        block = a[s:s + rows, None, :] * mult + b[None, :, :]
        out[s:s + rows] = _numpy_typical_mask(block.reshape(-1, n), lo, hi).reshape(-1, m2)
    return out


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _row_ok(row, lo, hi, counts):  # pragma: no cover - compiled
        counts[:] = 0
        for t in range(row.shape[0]):
            c = row[t]
            counts[c] += 1
            if counts[c] > hi[c]:
                return False
        for c in range(lo.shape[0]):
            if counts[c] < lo[c]:
                return False
        return True

    @numba.njit(cache=True, nogil=True)
    def _numba_typical_mask(codes, lo, hi):  # pragma: no cover - compiled
        m = codes.shape[0]
        out = np.zeros(m, dtype=np.bool_)
        counts = np.zeros(lo.shape[0], dtype=np.int64)
        for i in range(m):
            out[i] = _row_ok(codes[i], lo, hi, counts)
        return out

    @numba.njit(cache=True, nogil=True)
    def _numba_pair_mask(a, b, mult, lo, hi):  # pragma: no cover - compiled
        m1, n = a.shape
        m2 = b.shape[0]
        out = np.zeros((m1, m2), dtype=np.bool_)
        counts = np.zeros(lo.shape[0], dtype=np.int64)
        for i in range(m1):
            for j in range(m2):
                counts[:] = 0
                ok = True
                for t in range(n):
                    c = a[i, t] * mult + b[j, t]
                    counts[c] += 1
                    if counts[c] > hi[c]:
                        ok = False
                        break
                if ok:
                    for c in range(lo.shape[0]):
                        if counts[c] < lo[c]:
                            ok = False
                            break
                out[i, j] = ok
        return out


def backend_name() -> str:
    if numba is None or os.environ.get(ENV_FLAG, "") not in ("", "0"):
        return "numpy"
    return "numba"


def _prep(codes, lo, hi):
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[None, :]
    return codes, np.ascontiguousarray(lo, dtype=np.int64), np.ascontiguousarray(hi, dtype=np.int64)


def typical_mask(codes: np.ndarray, lo: np.ndarray, hi: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Boolean mask of typical rows of ``codes`` (shape [M, n])."""
    codes, lo, hi = _prep(codes, lo, hi)
    if (backend or backend_name()) == "numba":
        return _numba_typical_mask(codes, lo, hi)
    return _numpy_typical_mask(codes, lo, hi)


def pair_mask(a: np.ndarray, b: np.ndarray, mult: int, lo: np.ndarray, hi: np.ndarray,
              backend: str | None = None) -> np.ndarray:
    """Typicality of every pair (i, j) with joint code ``a[i] * mult + b[j]``."""
    a, lo, hi = _prep(a, lo, hi)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if b.ndim == 1:
        b = b[None, :]
    if (backend or backend_name()) == "numba":
        return _numba_pair_mask(a, b, int(mult), lo, hi)
    return _numpy_pair_mask(a, b, int(mult), lo, hi)
