"""Synthetic benchmarks and plain-CSV dataset I/O."""
import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HierarchicalSpec:
    """Three-level Gaussian cluster hierarchy (macro > meso > micro > points)."""

    dims: int = 50
    branching: tuple = (5, 5, 5)
    points_per_micro: int = 500
    variances: tuple = (10000.0, 1000.0, 100.0, 10.0)

    def __post_init__(self):
        v = self.variances
        if len(v) != 4 or any(a <= 0 for a in v) or any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError(f"variances must be 4 positive, strictly decreasing values: {v}")
        if len(self.branching) != 3 or min(self.branching) < 1:
            raise ValueError(f"branching must be three positive counts: {self.branching}")
        if self.points_per_micro < 1 or self.dims < 1:
            raise ValueError("points_per_micro and dims must be positive")


@dataclass
class LabeledDataset:
    """Observations with optional labels.

    ``labels`` is the class used by metrics (the last label column);
    ``label_levels`` keeps every label column, shape ``(N, L)``.
    """

    x: np.ndarray
    labels: np.ndarray | None = None
    label_levels: np.ndarray | None = None


def _micro_centers(rng, spec):
    n_macro, n_meso, n_micro = spec.branching
    sd = [math.sqrt(v) for v in spec.variances[:3]]
    d = spec.dims
    macro = rng.normal(0.0, sd[0], size=(n_macro, d))
    meso = macro[:, None, :] + rng.normal(0.0, sd[1], size=(n_macro, n_meso, d))
    micro = meso[:, :, None, :] + rng.normal(0.0, sd[2], size=(n_macro, n_meso, n_micro, d))
    return micro.reshape(-1, d)


def micro_centers(spec=HierarchicalSpec(), seed=0):
    """Micro cluster centers used by ``gen_hierarchical(spec, seed)``."""
    return _micro_centers(np.random.default_rng(seed), spec)


def gen_hierarchical(spec=HierarchicalSpec(), seed=0):
    """Sample the hierarchy; labels are micro ids, levels are (macro, meso, micro)."""
    rng = np.random.default_rng(seed)
    micro = _micro_centers(rng, spec)
    ppm = spec.points_per_micro
    noise = rng.normal(0.0, math.sqrt(spec.variances[3]), size=(micro.shape[0] * ppm, spec.dims))
    x = np.repeat(micro, ppm, axis=0) + noise

    _, n_meso, n_micro = spec.branching
    micro_id = np.repeat(np.arange(micro.shape[0]), ppm)
    levels = np.column_stack(
        [micro_id // (n_meso * n_micro), micro_id // n_micro, micro_id]
    ).astype(np.int64)
    return LabeledDataset(x=x, labels=micro_id.astype(np.int64), label_levels=levels)


S_CURVE_HOLE_T = math.pi / 4
S_CURVE_HOLE_U = 1.0


def s_curve_point(t, u):
    t = np.asarray(t, dtype=np.float64)
    return np.stack([np.sin(t), np.asarray(u, dtype=np.float64) * np.ones_like(t),
                     np.sign(t) * (np.cos(t) - 1.0)], axis=-1)


def gen_s_curve_with_hole(n, hole_radius=0.6, seed=0, max_rounds=1000):
    """3-D S-curve sheet with a disc of points around one anchor removed.

    Rejected draws are replaced until ``n`` points are accepted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    anchor = s_curve_point(S_CURVE_HOLE_T, S_CURVE_HOLE_U)
    kept = []
    total = 0
    for _ in range(max_rounds):
        need = n - total
        if need <= 0:
            break
        m = max(2 * need, 64)
        t = rng.uniform(-1.5 * math.pi, 1.5 * math.pi, size=m)
        u = rng.uniform(0.0, 2.0, size=m)
        pts = s_curve_point(t, u)
        ok = np.linalg.norm(pts - anchor, axis=1) > hole_radius
        pts = pts[ok][:need]
        kept.append(pts)
        total += pts.shape[0]
    if total < n:
        raise RuntimeError(f"hole of radius {hole_radius} rejects (almost) every draw")
    return np.concatenate(kept, axis=0)


class CSVFormatError(ValueError):
    def __init__(self, path, row, col, msg):
        self.path, self.row, self.col = path, row, col
        where = f"row {row}" + (f", column {col}" if col is not None else "")
        super().__init__(f"{path}: {where}: {msg}")


def load_csv(path, label_col=None, n_label_cols=1, header=False):
    """Read a dense numeric CSV.

    With ``label_col="last"`` the trailing ``n_label_cols`` columns are
    integer labels. Rows and columns in error messages are 1-based.
    """
    if label_col not in (None, "last"):
        raise ValueError(f"label_col must be None or 'last', got {label_col!r}")
    rows = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise CSVFormatError(path, lineno, None, f"expected {width} fields, found {len(rec)}")
            vals = []
            for col, cell in enumerate(rec, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CSVFormatError(path, lineno, col, f"not a number: {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise CSVFormatError(path, 1, None, "no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if label_col is None:
        return LabeledDataset(x=data)
    if n_label_cols < 1 or n_label_cols >= data.shape[1]:
        raise ValueError(f"cannot split {n_label_cols} label columns from {data.shape[1]} columns")
    lab = data[:, -n_label_cols:]
    if not np.all(lab == np.round(lab)):
        bad = np.argwhere(lab != np.round(lab))[0]
        raise CSVFormatError(path, int(bad[0]) + 1, data.shape[1] - n_label_cols + int(bad[1]) + 1,
                             "label is not an integer")
    lab = lab.astype(np.int64)
    return LabeledDataset(x=data[:, :-n_label_cols], labels=lab[:, -1], label_levels=lab)


def save_csv(path, matrix, labels=None):
    """Write ``matrix`` (plus optional integer label columns) with full precision."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    with open(path, "w", newline="") as fh:
        if labels is None:
            np.savetxt(fh, matrix, fmt="%.17g", delimiter=",")
            return
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim == 1:
            labels = labels[:, None]
        for row, lab in zip(matrix, labels):
            fh.write(",".join([repr(float(v)) for v in row] + [str(int(v)) for v in lab]) + "\n")
