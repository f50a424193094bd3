"""Exact brute-force k-nearest-neighbor search.

Candidates are shortlisted with the expanded ``|a|^2 + |b|^2 - 2ab`` form
(one matrix product per block of rows), then re-ranked with directly
computed squared distances so that results are exact and ties are broken
by ascending index.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._util import default_threads

_MARGIN = 16


def _rerank_row(x, i, k):
    d2 = np.sum((x - x[i]) ** 2, axis=1)
    d2[i] = np.inf
    idx = np.arange(x.shape[0])
    order = np.lexsort((idx, d2))[:k]
    return order, d2[order]


def _block(x, xx, start, stop, k):
    n = x.shape[0]
    xb = x[start:stop]
    rows = np.arange(start, stop)
    approx = xx[start:stop, None] + xx[None, :] - 2.0 * (xb @ x.T)
    approx[np.arange(stop - start), rows] = np.inf

    m = min(k + _MARGIN, n - 1)
    if m < n - 1:
        part = np.argpartition(approx, m, axis=1)
        cand = part[:, :m]
        # smallest approximate value left out of the shortlist
        outside = np.take_along_axis(approx, part[:, m : m + 1], axis=1)[:, 0]
    else:
        cand = np.tile(np.arange(n), (stop - start, 1))
        cand = cand[cand != rows[:, None]].reshape(stop - start, n - 1)
        outside = np.full(stop - start, np.inf)

    exact = np.sum((x[cand] - xb[:, None, :]) ** 2, axis=2)
    order = np.lexsort((cand, exact), axis=1)
    cand = np.take_along_axis(cand, order, axis=1)[:, :k]
    exact = np.take_along_axis(exact, order, axis=1)[:, :k]

    tol = 1e-9 * (xx[start:stop] + xx.max()) + 1e-300
    unsafe = np.nonzero(outside <= exact[:, -1] + tol)[0]
    for r in unsafe:
        cand[r], exact[r] = _rerank_row(x, start + r, k)
    return cand, exact


def knn(x, k, n_threads=None, block_size=1024):
    """Return ``(indices, distances)`` of the ``k`` nearest neighbors of each row.

    Self is excluded. Rows are ordered by increasing Euclidean distance with
    ties broken by the smaller index. ``k`` must satisfy ``1 <= k <= N - 1``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in [1, {n - 1}], got {k}")
    xx = np.einsum("ij,ij->i", x, x)
    bounds = [(s, min(s + block_size, n)) for s in range(0, n, block_size)]
    n_threads = n_threads or default_threads()

    def run(b):
        return _block(x, xx, b[0], b[1], k)

    if n_threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    idx = np.concatenate([p[0] for p in parts], axis=0)
    d2 = np.concatenate([p[1] for p in parts], axis=0)
    return idx, np.sqrt(d2)
