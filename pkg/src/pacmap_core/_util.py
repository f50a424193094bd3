import os
import warnings

THREADS_ENV = "PACMAP_NUM_THREADS"


class PacmapWarning(UserWarning):
    """Degenerate input handled by a documented fallback."""


def warn(msg):
    warnings.warn(msg, PacmapWarning, stacklevel=3)


def default_threads():
    """Thread count from the environment, 1 when unset or invalid."""
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def as_data_matrix(x, name="x"):
    import numpy as np

    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 1:
        raise ValueError(f"{name} needs at least 2 rows and 1 column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
