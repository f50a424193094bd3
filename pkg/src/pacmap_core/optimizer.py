"""Initialization, Adam, and the end-to-end fit loop."""
from dataclasses import dataclass, field

import numpy as np

from ._util import as_data_matrix, warn
from .objective import ScheduleConfig, loss_and_gradient, weight_schedule
from .pairset import build_pair_set

PCA_SCALE = 0.01
RANDOM_INIT_STD = 1e-2  # variance 1e-4
_EIGH_MAX_DIM = 1000


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    step: int = 0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam decay rates must lie in [0, 1)")
        if self.lr <= 0 or self.eps <= 0:
            raise ValueError("Adam lr and eps must be positive")

    @classmethod
    def zeros_like(cls, y, **kw):
        return cls(m=np.zeros_like(y, dtype=np.float64), v=np.zeros_like(y, dtype=np.float64), **kw)


def adam_step(state, grad, y):
    """One bias-corrected Adam update. Mutates ``state`` and ``y`` and returns both."""
    if grad.shape != y.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match embedding {y.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.argwhere(~np.isfinite(grad))[0]
        raise FloatingPointError(
            f"non-finite gradient at row {bad[0]}, column {bad[1]} (Adam step {state.step + 1})"
        )
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    y -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state, y


def _top_components(xc, d_out):
    p = xc.shape[1]
    if p <= _EIGH_MAX_DIM:
        cov = xc.T @ xc / max(xc.shape[0] - 1, 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:d_out]
        return np.clip(evals[order], 0.0, None), evecs[:, order]
    from scipy.sparse.linalg import svds

    k = min(d_out, min(xc.shape) - 1)
    _, s, vt = svds(xc, k=k, random_state=0)
    order = np.argsort(s)[::-1]
    return s[order] ** 2 / max(xc.shape[0] - 1, 1), vt[order].T


def pca_init(x, d_out=2, seed=0):
    """Project centered data on its top ``d_out`` principal axes, scaled by 0.01.

    Components with no variance are filled with N(0, 1e-4) noise.
    """
    x = as_data_matrix(x)
    xc = x - x.mean(axis=0)
    evals, evecs = _top_components(xc, d_out)
    # fix the sign ambiguity: largest loading of each axis is positive
    flip = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(evecs.shape[1])])
    evecs = evecs * np.where(flip == 0, 1.0, flip)
    y = np.zeros((x.shape[0], d_out))
    y[:, : evecs.shape[1]] = PCA_SCALE * (xc @ evecs)

    top = evals.max() if evals.size else 0.0
    live = np.zeros(d_out, dtype=bool)
    live[: evals.size] = evals > 1e-12 * max(top, np.finfo(np.float64).tiny)
    if top <= 0.0:
        live[:] = False
    if not live.all():
        warn(f"data rank below {d_out}; filling {int((~live).sum())} component(s) with noise")
        rng = np.random.default_rng(seed)
        y[:, ~live] = rng.normal(0.0, RANDOM_INIT_STD, size=(x.shape[0], int((~live).sum())))
    return y


def random_init(n, d_out=2, seed=0):
    if n < 1:
        raise ValueError("need at least one point")
    return np.random.default_rng(seed).normal(0.0, RANDOM_INIT_STD, size=(n, d_out))


@dataclass(frozen=True)
class FitConfig:
    n_nb: int = 10
    mn_ratio: float = 0.5
    fp_ratio: float = 2.0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    init: str = "pca"
    seed: int = 0
    d_out: int = 2
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    n_threads: int | None = None

    def __post_init__(self):
        if self.init not in ("pca", "random"):
            raise ValueError(f"init must be 'pca' or 'random', got {self.init!r}")
        if self.d_out < 1:
            raise ValueError("d_out must be >= 1")


@dataclass
class FitResult:
    embedding: np.ndarray
    pairs: object
    initial: np.ndarray
    losses: np.ndarray


def fit_full(x, cfg=FitConfig(), pairs=None):
    """Run the whole pipeline and keep the intermediate artifacts.

    ``losses[t-1]`` is the total loss at the start of iteration ``t`` under
    that iteration's weights.
    """
    x = as_data_matrix(x)
    pair_seed, init_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    if pairs is None:
        pairs = build_pair_set(
            x, cfg.n_nb, cfg.mn_ratio, cfg.fp_ratio, seed=pair_seed, n_threads=cfg.n_threads
        )
    if cfg.init == "pca":
        y = pca_init(x, cfg.d_out, seed=init_seed)
    else:
        y = random_init(x.shape[0], cfg.d_out, seed=init_seed)
    y0 = y.copy()

    state = AdamState.zeros_like(y, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    losses = np.empty(cfg.schedule.n_iterations)
    for t in range(1, cfg.schedule.n_iterations + 1):
        w = weight_schedule(t, cfg.schedule)
        loss, grad = loss_and_gradient(y, pairs, w)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at iteration {t}")
        losses[t - 1] = loss
        adam_step(state, grad, y)
    y.flags.writeable = False
    return FitResult(embedding=y, pairs=pairs, initial=y0, losses=losses)


def fit(x, cfg=FitConfig()):
    """Embed ``x`` and return the final ``N x d_out`` coordinates."""
    return fit_full(x, cfg).embedding
