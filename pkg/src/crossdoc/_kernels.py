"""Numeric kernels behind pair scoring, threshold sweeps and agglomeration.

Each kernel has a numba-compiled implementation and a pure-numpy one.
The compiled path is used when numba imports cleanly; set CROSSDOC_NUMBA=0
to force the numpy path (the benchmark script times both).
"""

from __future__ import annotations

import os

import numpy as np

LINKAGE_AVERAGE = 0
LINKAGE_SINGLE = 1
LINKAGE_COMPLETE = 2

LINKAGE_CODES = {
    "average": LINKAGE_AVERAGE,
    "single": LINKAGE_SINGLE,
    "complete": LINKAGE_COMPLETE,
}

_env = os.environ.get("CROSSDOC_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "no", "off")

try:  # pragma: no cover - exercised implicitly by backend selection
    if _want_numba:
        from numba import njit
    else:
        njit = None
except ImportError:  # pragma: no cover
    njit = None


def backend() -> str:
    """Which implementation the dispatching wrappers select."""
    return "numba" if njit is not None else "numpy"


# ---------------------------------------------------------------------------
# cosine similarity matrix


def cosine_matrix_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between rows of a (n×d) and b (m×d).

    Rows must be non-zero; values are clamped to [-1, 1] so downstream
    thresholds never see 1.0000001.
    """
    an = a / np.linalg.norm(a, axis=1, keepdims=True)
    bn = b / np.linalg.norm(b, axis=1, keepdims=True)
    return np.clip(an @ bn.T, -1.0, 1.0)


if njit is not None:

    @njit(cache=True)
    def _cosine_matrix_jit(a, b):  # pragma: no cover - compiled
        n, d = a.shape
        m = b.shape[0]
        out = np.empty((n, m), dtype=np.float64)
        bnorm = np.empty(m, dtype=np.float64)
        for j in range(m):
            s = 0.0
            for k in range(d):
                s += b[j, k] * b[j, k]
            bnorm[j] = np.sqrt(s)
        for i in range(n):
            s = 0.0
            for k in range(d):
                s += a[i, k] * a[i, k]
            anorm = np.sqrt(s)
            for j in range(m):
                dot = 0.0
                for k in range(d):
                    dot += a[i, k] * b[j, k]
                v = dot / (anorm * bnorm[j])
                if v > 1.0:
                    v = 1.0
                elif v < -1.0:
                    v = -1.0
                out[i, j] = v
        return out


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # always the numpy path: BLAS matmul beats the compiled loops here
    # (see benchmarks/bench_kernels.py); the jit version stays as a baseline
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return cosine_matrix_np(a, b)


# ---------------------------------------------------------------------------
# threshold sweep


def sweep_accuracy_np(sims: np.ndarray, gold: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Pairwise accuracy of (sim >= t) against gold for every threshold.

    Missing similarities are encoded as -inf and therefore classify as 0.
    """
    predicted = sims[None, :] >= thresholds[:, None]
    return (predicted == gold[None, :].astype(bool)).mean(axis=1)


if njit is not None:

    @njit(cache=True)
    def _sweep_accuracy_jit(sims, gold, thresholds):  # pragma: no cover - compiled
        nt = thresholds.shape[0]
        n = sims.shape[0]
        out = np.empty(nt, dtype=np.float64)
        for ti in range(nt):
            t = thresholds[ti]
            correct = 0
            for i in range(n):
                pred = 1 if sims[i] >= t else 0
                if pred == gold[i]:
                    correct += 1
            out[ti] = correct / n
        return out


def sweep_accuracy(sims: np.ndarray, gold: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    sims = np.ascontiguousarray(sims, dtype=np.float64)
    gold = np.ascontiguousarray(gold, dtype=np.int64)
    thresholds = np.ascontiguousarray(thresholds, dtype=np.float64)
    if njit is not None:
        return _sweep_accuracy_jit(sims, gold, thresholds)
    return sweep_accuracy_np(sims, gold, thresholds)


# ---------------------------------------------------------------------------
# agglomerative clustering over a pairwise score matrix
#
# Greedy bottom-up merging: repeatedly join the active cluster pair with the
# highest linkage score while that score >= tau. Ties break on the smallest
# (min rank, max rank) pair, where a cluster's rank is the smallest
# lexicographic rank of its members, so output is order-independent.


def agglomerate_np(scores: np.ndarray, tau: float, ranks: np.ndarray, linkage: int) -> np.ndarray:
    n = scores.shape[0]
    labels = np.arange(n, dtype=np.int64)
    if n <= 1:
        return labels
    link = scores.astype(np.float64).copy()
    np.fill_diagonal(link, -np.inf)
    sizes = np.ones(n, dtype=np.float64)
    minrank = ranks.astype(np.int64).copy()
    active = np.ones(n, dtype=bool)

    for _ in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], link, -np.inf)
        np.fill_diagonal(masked, -np.inf)
        best = masked.max()
        if not best >= tau:
            break
        ii, jj = np.nonzero(masked == best)
        cand = [
            (min(minrank[i], minrank[j]), max(minrank[i], minrank[j]), i, j)
            for i, j in zip(ii.tolist(), jj.tolist())
            if i < j and active[i] and active[j]
        ]
        if not cand:
            break
        _, _, i, j = min(cand)
        # keep the cluster holding the smallest rank as the survivor
        if minrank[j] < minrank[i]:
            i, j = j, i
        others = active.copy()
        others[i] = others[j] = False
        if linkage == LINKAGE_AVERAGE:
            merged = (sizes[i] * link[i, others] + sizes[j] * link[j, others]) / (
                sizes[i] + sizes[j]
            )
        elif linkage == LINKAGE_SINGLE:
            merged = np.maximum(link[i, others], link[j, others])
        else:
            merged = np.minimum(link[i, others], link[j, others])
        link[i, others] = merged
        link[others, i] = merged
        sizes[i] += sizes[j]
        minrank[i] = min(minrank[i], minrank[j])
        active[j] = False
        labels[labels == labels[j]] = labels[i]
    return labels


if njit is not None:

    @njit(cache=True)
    def _agglomerate_jit(scores, tau, ranks, linkage):  # pragma: no cover - compiled
        n = scores.shape[0]
        labels = np.arange(n)
        if n <= 1:
            return labels
        link = scores.copy()
        for i in range(n):
            link[i, i] = -np.inf
        sizes = np.ones(n, dtype=np.float64)
        minrank = ranks.copy()
        active = np.ones(n, dtype=np.bool_)

        for _ in range(n - 1):
            best = -np.inf
            bi = -1
            bj = -1
            blo = 0
            bhi = 0
            for i in range(n):
                if not active[i]:
                    continue
                for j in range(i + 1, n):
                    if not active[j]:
                        continue
                    v = link[i, j]
                    if v < tau:
                        continue
                    lo = minrank[i] if minrank[i] < minrank[j] else minrank[j]
                    hi = minrank[i] if minrank[i] > minrank[j] else minrank[j]
                    if bi < 0 or v > best or (v == best and (lo < blo or (lo == blo and hi < bhi))):
                        best = v
                        bi = i
                        bj = j
                        blo = lo
                        bhi = hi
            if bi < 0:
                break
            i = bi
            j = bj
            if minrank[j] < minrank[i]:
                i, j = j, i
            for k in range(n):
                if not active[k] or k == i or k == j:
                    continue
                if linkage == 0:
                    m = (sizes[i] * link[i, k] + sizes[j] * link[j, k]) / (sizes[i] + sizes[j])
                elif linkage == 1:
                    m = max(link[i, k], link[j, k])
                else:
                    m = min(link[i, k], link[j, k])
                link[i, k] = m
                link[k, i] = m
            sizes[i] += sizes[j]
            if minrank[j] < minrank[i]:
                minrank[i] = minrank[j]
            active[j] = False
            old = labels[j]
            new = labels[i]
            for k in range(n):
                if labels[k] == old:
                    labels[k] = new
        return labels


def agglomerate(scores: np.ndarray, tau: float, ranks: np.ndarray, linkage: int) -> np.ndarray:
    """Cluster labels (arbitrary ints, one per row) for a square score matrix."""
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    ranks = np.ascontiguousarray(ranks, dtype=np.int64)
    if njit is not None:
        return _agglomerate_jit(scores, float(tau), ranks, linkage)
    return agglomerate_np(scores, float(tau), ranks, linkage)
