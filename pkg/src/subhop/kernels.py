"""Cosine-scan kernels behind the top-k retrieval path.

Two interchangeable implementations of the same scoring contract: a
numba-jitted loop (default when numba imports) and a pure-numpy path.
Set SUBHOP_KERNEL=numpy to force the fallback, SUBHOP_KERNEL=numba to
require the jitted path. Both return identical scores within 1e-12.
"""

from __future__ import annotations

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

ENV_VAR = "SUBHOP_KERNEL"


def cosine_scores_numpy(
    matrix: np.ndarray, norms: np.ndarray, query: np.ndarray, query_norm: float
) -> np.ndarray:
    """Cosine of the query against every row; zero-norm rows or a zero-norm
    query score 0 instead of NaN."""
    n = matrix.shape[0]
    out = np.zeros(n, dtype=np.float64)
    if n == 0 or query_norm == 0.0:
        return out
    dots = matrix @ query
    denom = norms * query_norm
    nonzero = denom > 0.0
    out[nonzero] = dots[nonzero] / denom[nonzero]
    return out


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True)
    def cosine_scores_numba(matrix, norms, query, query_norm):  # pragma: no cover
        n, d = matrix.shape
        out = np.zeros(n, dtype=np.float64)
        if query_norm == 0.0:
            return out
        for i in range(n):
            ni = norms[i]
            if ni == 0.0:
                continue
            acc = 0.0
            for j in range(d):
                acc += matrix[i, j] * query[j]
            out[i] = acc / (ni * query_norm)
        return out


def _select() -> tuple[str, object]:
    forced = os.environ.get(ENV_VAR, "auto").strip().lower()
    if forced not in ("auto", "numba", "numpy"):
        logger.warning("ignoring unknown %s=%r, using auto", ENV_VAR, forced)
        forced = "auto"
    if forced == "numpy":
        return "numpy", cosine_scores_numpy
    if not _HAVE_NUMBA:
        if forced == "numba":
            raise ImportError("numba requested via SUBHOP_KERNEL but not installed")
        logger.info("numba unavailable, using numpy kernels")
        return "numpy", cosine_scores_numpy
    return "numba", cosine_scores_numba


KERNEL_BACKEND, cosine_scores = _select()
