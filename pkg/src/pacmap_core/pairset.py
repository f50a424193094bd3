"""Neighbor, mid-near and further pair construction.

Neighbors are chosen by the locally scaled distance
``|x_i - x_j|^2 / (sigma_i * sigma_j)`` among a Euclidean shortlist, where
``sigma_i`` is the mean distance from ``x_i`` to its 4th-6th nearest
neighbors. Mid-near partners are the second closest of six uniformly drawn
points; further partners are uniform draws among non-neighbors.

Every anchor draws from its own substream of the run seed, so the pair set
does not depend on the order (or parallelism) in which anchors are visited.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._util import as_data_matrix, warn
from .knn import knn

EXTRA_CANDIDATES = 50
MID_NEAR_SAMPLE = 6

_MN_STREAM = 1
_FP_STREAM = 2


@dataclass(frozen=True)
class PairSet:
    """Index pairs ``(anchor, partner)`` for the three edge types.

    Each array has shape ``(N * n_<kind>, 2)`` and is grouped by anchor.
    """

    nb: np.ndarray
    mn: np.ndarray
    fp: np.ndarray
    n_nb: int
    n_mn: int
    n_fp: int

    @property
    def n(self):
        return max(
            (int(a.max()) + 1 for a in (self.nb, self.mn, self.fp) if a.size),
            default=0,
        )

    def __eq__(self, other):
        if not isinstance(other, PairSet):
            return NotImplemented
        return (
            (self.n_nb, self.n_mn, self.n_fp) == (other.n_nb, other.n_mn, other.n_fp)
            and np.array_equal(self.nb, other.nb)
            and np.array_equal(self.mn, other.mn)
            and np.array_equal(self.fp, other.fp)
        )

    @classmethod
    def empty(cls):
        z = np.empty((0, 2), dtype=np.int64)
        return cls(z, z, z, 0, 0, 0)


def _anchor_rng(seed, stream, i):
    if isinstance(seed, np.random.SeedSequence):
        entropy, key = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, key = int(seed), ()
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key + (stream, i)))


def compute_sigmas(x, neighbor_dists=None):
    """Per-point scale: mean distance to the 4th, 5th and 6th nearest neighbors.

    ``neighbor_dists`` may hold precomputed sorted neighbor distances (self
    excluded, at least six columns). With fewer than seven points the last
    three available neighbors are averaged instead. Zero scales (duplicated
    points) are replaced by the smallest positive double.
    """
    x = as_data_matrix(x)
    n = x.shape[0]
    if neighbor_dists is None:
        neighbor_dists = knn(x, min(6, n - 1))[1]
    if n < 7:
        warn(f"only {n} points: sigma averages the farthest {min(3, n - 1)} neighbors")
        sigma = neighbor_dists[:, -3:].mean(axis=1)
    else:
        sigma = neighbor_dists[:, 3:6].mean(axis=1)
    zero = sigma <= 0.0
    if np.any(zero):
        warn(f"{int(zero.sum())} points have zero sigma (duplicates); using machine epsilon")
        sigma = np.where(zero, np.finfo(np.float64).tiny, sigma)
    return sigma


def scaled_distance(x, sigma, i, j):
    if i == j:
        raise ValueError("scaled distance needs two distinct indices")
    diff = x[i] - x[j]
    return float(diff @ diff) / (sigma[i] * sigma[j])


def _clamp_neighbors(n_nb, n):
    if n_nb < 1:
        raise ValueError(f"n_nb must be >= 1, got {n_nb}")
    if n_nb > n - 1:
        warn(f"n_nb={n_nb} exceeds N-1={n - 1}; clamping")
        return n - 1
    return n_nb


def select_neighbors(x, sigma, n_nb, candidates=None):
    """Neighbor pairs chosen by scaled distance from a Euclidean shortlist.

    ``candidates`` optionally supplies the shortlist as an ``(N, m)`` index
    array ordered by Euclidean distance; by default the
    ``min(n_nb + 50, N - 1)`` exact nearest neighbors are used.
    """
    x = as_data_matrix(x)
    n = x.shape[0]
    n_nb = _clamp_neighbors(n_nb, n)
    if candidates is None:
        candidates = knn(x, min(n_nb + EXTRA_CANDIDATES, n - 1))[0]
    d2 = np.sum((x[candidates] - x[:, None, :]) ** 2, axis=2)
    scaled = d2 / (sigma[:, None] * sigma[candidates])
    order = np.lexsort((candidates, scaled), axis=1)[:, :n_nb]
    partners = np.take_along_axis(candidates, order, axis=1)
    anchors = np.repeat(np.arange(n), n_nb)
    return np.column_stack([anchors, partners.ravel()]).astype(np.int64)


def _draw_distinct(rng, n, exclude, size):
    """``size`` distinct draws from ``range(n)`` minus ``exclude``, in draw order."""
    chosen = []
    seen = set(exclude)
    while len(chosen) < size:
        for c in rng.integers(0, n, size=2 * (size - len(chosen)) + 4).tolist():
            if c not in seen:
                seen.add(c)
                chosen.append(c)
                if len(chosen) == size:
                    break
    return chosen


def sample_mid_near(x, n_mn, seed):
    """For each anchor, ``n_mn`` partners picked as the 2nd closest of 6 random points."""
    x = as_data_matrix(x)
    n = x.shape[0]
    if n_mn <= 0:
        return np.empty((0, 2), dtype=np.int64)
    size = MID_NEAR_SAMPLE
    if n - 1 < size:
        warn(f"only {n - 1} other points; mid-near partners drawn from all of them")
        size = n - 1
    rank = 1 if size >= 2 else 0

    cand = np.empty((n, n_mn, size), dtype=np.int64)
    for i in range(n):
        rng = _anchor_rng(seed, _MN_STREAM, i)
        for t in range(n_mn):
            cand[i, t] = _draw_distinct(rng, n, (i,), size)
    d2 = np.sum((x[cand] - x[:, None, None, :]) ** 2, axis=3)
    order = np.lexsort((cand, d2), axis=2)[:, :, rank]
    partners = np.take_along_axis(cand, order[:, :, None], axis=2)[:, :, 0]
    anchors = np.repeat(np.arange(n), n_mn)
    return np.column_stack([anchors, partners.ravel()]).astype(np.int64)


def sample_further(x, nb, n_fp, seed):
    """For each anchor, ``n_fp`` distinct uniform partners that are not its neighbors."""
    x = as_data_matrix(x)
    n = x.shape[0]
    if n_fp <= 0:
        return np.empty((0, 2), dtype=np.int64)
    nb = np.asarray(nb, dtype=np.int64).reshape(-1, 2)
    partners_of = [[] for _ in range(n)]
    for a, b in nb.tolist():
        partners_of[a].append(b)

    rows = []
    short = 0
    for i in range(n):
        exclude = set(partners_of[i])
        exclude.add(i)
        eligible = n - len(exclude)
        if eligible <= n_fp:
            short += eligible < n_fp
            picks = [c for c in range(n) if c not in exclude]
        else:
            picks = _draw_distinct(_anchor_rng(seed, _FP_STREAM, i), n, exclude, n_fp)
        rows.extend((i, c) for c in picks)
    if short:
        warn(f"{short} anchors have fewer than {n_fp} non-neighbors; taking all of them")
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def pair_counts(n_nb, mn_ratio, fp_ratio):
    if n_nb < 1 or mn_ratio < 0 or fp_ratio < 0:
        raise ValueError("need n_nb >= 1 and non-negative ratios")
    # tolerance absorbs products like 100 * 0.29 = 28.999999999999996
    return (
        int(n_nb),
        int(math.floor(n_nb * mn_ratio + 1e-9)),
        int(math.floor(n_nb * fp_ratio + 1e-9)),
    )


def build_pair_set(x, n_nb=10, mn_ratio=0.5, fp_ratio=2.0, seed=0, n_threads=None):
    """Build the full pair graph for ``x``.

    The same ``(x, config, seed)`` always yields an identical ``PairSet``.
    """
    x = as_data_matrix(x)
    n = x.shape[0]
    _, n_mn, n_fp = pair_counts(n_nb, mn_ratio, fp_ratio)
    n_nb = _clamp_neighbors(n_nb, n)

    k = min(max(n_nb + EXTRA_CANDIDATES, 6), n - 1)
    idx, dist = knn(x, k, n_threads=n_threads)
    sigma = compute_sigmas(x, neighbor_dists=dist[:, : min(6, n - 1)])
    nb = select_neighbors(x, sigma, n_nb, candidates=idx[:, : min(n_nb + EXTRA_CANDIDATES, n - 1)])
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    mn = sample_mid_near(x, n_mn, seed)
    fp = sample_further(x, nb, n_fp, seed)
    return PairSet(nb=nb, mn=mn, fp=fp, n_nb=n_nb, n_mn=n_mn, n_fp=n_fp)
