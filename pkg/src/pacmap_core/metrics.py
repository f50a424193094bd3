"""Embedding quality metrics.

* leave-one-out KNN accuracy (local structure, needs labels)
* random triplet accuracy (global structure, label free)
* centroid triplet accuracy (global structure between classes)

A triplet ``(i; j, k)`` is preserved when the sign of
``|x_i - x_j| - |x_i - x_k|`` equals the sign of the same difference in the
embedding. An exact tie counts as preserved only if it is a tie in both
spaces.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._util import warn
from .knn import knn

DEFAULT_K_SET = (1, 3, 5, 10, 15, 20)


@dataclass(frozen=True)
class MetricReport:
    name: str
    mean: float
    std: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.mean <= 1.0) or self.std < 0.0:
            raise ValueError(f"invalid metric values mean={self.mean} std={self.std}")

    def as_dict(self):
        return {"name": self.name, "mean": self.mean, "std": self.std, "params": dict(self.params)}


def _encode(labels):
    labels = np.asarray(labels).ravel()
    classes, codes = np.unique(labels, return_inverse=True)
    return classes, codes


def _vote(neighbor_codes, n_classes):
    """Majority label per row; ties go to the label seen first (nearest)."""
    n, k = neighbor_codes.shape
    rows = np.repeat(np.arange(n), k)
    counts = np.zeros((n, n_classes), dtype=np.int64)
    np.add.at(counts, (rows, neighbor_codes.ravel()), 1)
    first = np.full((n, n_classes), k, dtype=np.int64)
    pos = np.tile(np.arange(k), n)
    np.minimum.at(first, (rows, neighbor_codes.ravel()), pos)
    best = counts.max(axis=1, keepdims=True)
    first = np.where(counts == best, first, k + 1)
    return np.argmin(first, axis=1)


def knn_accuracy(y, labels, k_set=DEFAULT_K_SET, n_threads=None):
    """Leave-one-out KNN classification accuracy in the embedding.

    Every ``k`` in ``k_set`` is evaluated; the report carries the best
    accuracy and the ``k`` that achieved it (smallest ``k`` on ties).
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if labels is None:
        raise ValueError("knn accuracy needs labels")
    classes, codes = _encode(labels)
    if codes.shape[0] != n:
        raise ValueError(f"{codes.shape[0]} labels for {n} points")
    k_set = sorted(set(int(k) for k in k_set))
    if not k_set or k_set[0] < 1 or k_set[-1] >= n:
        raise ValueError(f"every k must lie in [1, {n - 1}], got {k_set}")
    if len(classes) < 2:
        warn("single class: knn accuracy is trivially 1")
        return MetricReport("knn", 1.0, 0.0, {"k": k_set[0], "per_k": {k: 1.0 for k in k_set}})

    idx, _ = knn(y, k_set[-1], n_threads=n_threads)
    neighbor_codes = codes[idx]
    per_k = {}
    for k in k_set:
        pred = _vote(neighbor_codes[:, :k], len(classes))
        per_k[k] = float(np.mean(pred == codes))
    best_k = max(k_set, key=lambda k: (per_k[k], -k))
    return MetricReport("knn", per_k[best_k], 0.0, {"k": best_k, "per_k": per_k})


def _preserved(dx_ij, dx_ik, dy_ij, dy_ik):
    return np.sign(dx_ij - dx_ik) == np.sign(dy_ij - dy_ik)


def _sq(a, b):
    d = a - b
    return np.einsum("...j,...j->...", d, d)


def random_triplet_accuracy(x, y, per_point=5, repeats=5, seed=0):
    """Fraction of random triplets whose distance order survives the embedding.

    Each repeat draws ``per_point`` unordered partner pairs for every anchor.
    Mean and (population) standard deviation are taken over repeats.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise ValueError("random triplets need at least 3 points")
    if y.shape[0] != n:
        raise ValueError("x and y must have the same number of rows")
    anchors = np.repeat(np.arange(n), per_point)
    scores = []
    for ss in np.random.SeedSequence(seed).spawn(repeats):
        rng = np.random.default_rng(ss)
        j = rng.integers(0, n - 1, size=anchors.size)
        j = j + (j >= anchors)
        lo, hi = np.minimum(anchors, j), np.maximum(anchors, j)
        k = rng.integers(0, n - 2, size=anchors.size)
        k = k + (k >= lo)
        k = k + (k >= hi)
        ok = _preserved(
            _sq(x[anchors], x[j]), _sq(x[anchors], x[k]), _sq(y[anchors], y[j]), _sq(y[anchors], y[k])
        )
        scores.append(float(np.mean(ok)))
    scores = np.asarray(scores)
    return MetricReport(
        "rt",
        float(scores.mean()),
        float(scores.std()),
        {"per_point": per_point, "repeats": repeats, "seed": seed},
    )


def class_centroids(x, codes, n_classes):
    x = np.asarray(x, dtype=np.float64)
    sums = np.zeros((n_classes, x.shape[1]))
    np.add.at(sums, codes, x)
    return sums / np.bincount(codes, minlength=n_classes)[:, None]


def centroid_triplet_accuracy(x, y, labels):
    """Exhaustive triplet accuracy over class centroids (``m * C(m-1, 2)`` triplets)."""
    if labels is None:
        raise ValueError("centroid triplet accuracy needs labels")
    classes, codes = _encode(labels)
    m = len(classes)
    if m < 3:
        raise ValueError(f"centroid triplet accuracy needs at least 3 classes, got {m}")
    cx = class_centroids(x, codes, m)
    cy = class_centroids(y, codes, m)
    dx = _sq(cx[:, None, :], cx[None, :, :])
    dy = _sq(cy[:, None, :], cy[None, :, :])
    a, b, c = [], [], []
    for i in range(m):
        others = [o for o in range(m) if o != i]
        for p, q in combinations(others, 2):
            a.append(i)
            b.append(p)
            c.append(q)
    a, b, c = map(np.asarray, (a, b, c))
    ok = _preserved(dx[a, b], dx[a, c], dy[a, b], dy[a, c])
    return MetricReport("ct", float(np.mean(ok)), 0.0, {"classes": m, "triplets": int(a.size)})
