"""Loss-landscape auditing over ``(d_ij, d_ik)``.

A triplet surface is a loss of the attracted distance ``d_ij`` and the
repulsed distance ``d_ik``. ``rainbow_grid`` tabulates a surface and its
partial derivatives on a log-spaced grid; ``check_principles`` turns the six
asymptotic principles into finite-grid falsifiers; ``check_prop1`` checks the
sufficient conditions on separable force profiles ``f`` (attraction) and
``g`` (repulsion).

Grid arrays are indexed ``[row, col] = [d_ik index, d_ij index]`` so rows
run along ``d_ij`` at fixed ``d_ik``.
"""
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import expit

BADLOSS4_FLOOR = 1e-12


@dataclass(frozen=True)
class TripletLossSurface:
    name: str
    loss: Callable
    partials: Optional[Callable] = None
    mask: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def evaluate(self, a, b):
        return self.loss(np.asarray(a, float), np.asarray(b, float))

    def gradient(self, a, b):
        """``(dL/dd_ij, dL/dd_ik)``; central differences with step ``1e-4 * coordinate``."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        if self.partials is not None:
            return self.partials(a, b)
        ha, hb = 1e-4 * a, 1e-4 * b
        g_ij = (self.loss(a + ha, b) - self.loss(a - ha, b)) / (2 * ha)
        g_ik = (self.loss(a, b + hb) - self.loss(a, b - hb)) / (2 * hb)
        return g_ij, g_ik

    def invalid(self, a, b):
        if self.mask is None:
            return np.zeros(np.broadcast(np.asarray(a), np.asarray(b)).shape, dtype=bool)
        return self.mask(np.asarray(a, float), np.asarray(b, float))


@dataclass(frozen=True)
class SeparableProfile:
    """Attractive force ``f(d_ij)`` and repulsive force ``g(d_ik)``, both >= 0 when well behaved."""

    name: str
    f: Callable
    g: Callable
    params: dict = field(default_factory=dict)


# -- built-in surfaces -------------------------------------------------------


def _pacmap_surface():
    def loss(a, b):
        ta, tb = a * a + 1, b * b + 1
        return ta / (10 + ta) + 1 / (1 + tb)

    def partials(a, b):
        ta, tb = a * a + 1, b * b + 1
        return 20 * a / (10 + ta) ** 2 + 0 * b, -2 * b / (1 + tb) ** 2 + 0 * a

    return TripletLossSurface("pacmap", loss, partials)


def _badloss1():
    def loss(a, b):
        return np.logaddexp(0.0, (a * a - b * b) / 10)

    def partials(a, b):
        s = expit((a * a - b * b) / 10)
        return s * a / 5, -s * b / 5

    return TripletLossSurface("badloss1", loss, partials)


def _badloss2():
    def loss(a, b):
        return (a * a + 1) / (b * b + 1)

    def partials(a, b):
        return 2 * a / (b * b + 1), -2 * b * (a * a + 1) / (b * b + 1) ** 2

    return TripletLossSurface("badloss2", loss, partials)


def _badloss3():
    def loss(a, b):
        return -(b * b + 1) / (a * a + 1)

    def partials(a, b):
        return 2 * a * (b * b + 1) / (a * a + 1) ** 2, -2 * b / (a * a + 1)

    return TripletLossSurface("badloss3", loss, partials)


def _badloss4_parts(a, b):
    # 1 + e^(a^2) - e^(b^2) = e^(a^2) * s, with s evaluated without overflow
    with np.errstate(over="ignore", invalid="ignore"):
        s = np.exp(-a * a) - np.expm1((b - a) * (b + a))
        log_arg = a * a + np.log(np.where(s > 0, s, np.nan))
    bad = ~(s > 0) | ~(log_arg > math.log(BADLOSS4_FLOOR))
    return s, log_arg, bad


def _badloss4():
    def loss(a, b):
        _, log_arg, bad = _badloss4_parts(a, b)
        return np.where(bad, math.log(BADLOSS4_FLOOR), log_arg)

    def partials(a, b):
        s, _, bad = _badloss4_parts(a, b)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            g_ij = 2 * a / s
            g_ik = -2 * b * np.exp((b - a) * (b + a)) / s
        return np.where(bad, np.nan, g_ij), np.where(bad, np.nan, g_ik)

    def mask(a, b):
        return _badloss4_parts(a, b)[2]

    return TripletLossSurface("badloss4", loss, partials, mask)


def _forceatlas2(k=10, k_r=10.0):
    c = k_r * (k + 1) ** 2

    def loss(a, b):
        # repulsion enters with a minus sign so the loss falls as d_ik grows
        return a * a / 2 - c * np.log(b)

    def partials(a, b):
        return a + 0 * b, -c / b + 0 * a

    return TripletLossSurface("forceatlas2", loss, partials, params={"k": k, "k_r": k_r})


_SURFACES = {
    "pacmap": _pacmap_surface,
    "badloss1": _badloss1,
    "badloss2": _badloss2,
    "badloss3": _badloss3,
    "badloss4": _badloss4,
    "forceatlas2": _forceatlas2,
}
SURFACE_NAMES = tuple(_SURFACES)


def builtin_surface(name, **params):
    try:
        make = _SURFACES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {', '.join(SURFACE_NAMES)}") from None
    return make(**params)


# -- built-in profiles -------------------------------------------------------


def builtin_profile(name, **params):
    if name == "pacmap":
        return SeparableProfile(
            "pacmap",
            lambda d: 20 * d / (11 + d * d) ** 2,
            lambda d: 2 * d / (2 + d * d) ** 2,
        )
    if name == "umap":
        a, b, eps = params.get("a", 1.0), params.get("b", 1.0), params.get("eps", 1e-3)
        if a <= 0 or b <= 0 or eps <= 0:
            raise ValueError("umap profile needs a > 0, b > 0, eps > 0")
        return SeparableProfile(
            "umap",
            lambda d: d ** (2 * b - 1) / (1 + a * d ** (2 * b)),
            lambda d: d / ((eps + d * d) * (1 + a * d ** (2 * b))),
            {"a": a, "b": b, "eps": eps},
        )
    if name == "tsne_pair":
        p, big_b = params.get("p", 1.0), params.get("B", 1.0)
        if big_b <= 0 or p < 0:
            raise ValueError("tsne_pair profile needs B > 0 and p >= 0")

        def g(d):
            q = 1 / (1 + d * d)
            return 4 * (q / (big_b + q)) * d * q

        return SeparableProfile("tsne_pair", lambda d: 4 * p * d / (1 + d * d), g, {"p": p, "B": big_b})
    if name == "forceatlas2":
        k, k_r = params.get("k", 10), params.get("k_r", 10.0)
        if k_r <= 0 or k < 0:
            raise ValueError("forceatlas2 profile needs k_r > 0 and k >= 0")
        c = k_r * (k + 1) ** 2
        return SeparableProfile("forceatlas2", lambda d: d * 1.0, lambda d: c / d, {"k": k, "k_r": k_r})
    raise ValueError(f"unknown profile {name!r}")


def surface_from_profile(profile, ref=1.0):
    """Separable surface ``F(d_ij) - G(d_ik)`` with ``F' = f`` and ``G' = g``.

    Loss values are integrals from ``ref`` (defined up to a constant).
    """

    def _integral(fn, x):
        x = np.asarray(x, float)
        flat = np.array([integrate.quad(fn, ref, v, limit=200)[0] for v in x.ravel()])
        return flat.reshape(x.shape)

    def loss(a, b):
        a, b = np.broadcast_arrays(a, b)
        ua, ia = np.unique(a, return_inverse=True)
        ub, ib = np.unique(b, return_inverse=True)
        return _integral(profile.f, ua)[ia].reshape(a.shape) - _integral(profile.g, ub)[ib].reshape(b.shape)

    def partials(a, b):
        a, b = np.broadcast_arrays(a, b)
        return profile.f(a), -profile.g(b)

    return TripletLossSurface(profile.name, loss, partials, params=dict(profile.params))


# -- rainbow grid ------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    lo: float = 1e-2
    hi: float = 1e2
    n: int = 200

    def __post_init__(self):
        if not (0 < self.lo < self.hi) or self.n < 2:
            raise ValueError(f"grid needs 0 < lo < hi and n >= 2, got {self}")

    def axis(self):
        return np.logspace(math.log10(self.lo), math.log10(self.hi), self.n)


@dataclass
class RainbowGrid:
    name: str
    d_ij: np.ndarray
    d_ik: np.ndarray
    loss: np.ndarray
    grad_ij: np.ndarray
    grad_ik: np.ndarray
    magnitude: np.ndarray
    mask: np.ndarray

    @property
    def n_masked(self):
        return int(self.mask.sum())

    def to_csv(self, path):
        cols = ("d_ij", "d_ik", "loss", "grad_ij", "grad_ik", "magnitude", "mask")
        aa, bb = np.meshgrid(self.d_ij, self.d_ik)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for vals in zip(aa.ravel(), bb.ravel(), self.loss.ravel(), self.grad_ij.ravel(),
                            self.grad_ik.ravel(), self.magnitude.ravel(), self.mask.ravel()):
                w.writerow([repr(float(v)) for v in vals[:6]] + [int(vals[6])])


def rainbow_grid(surface, grid=GridSpec()):
    axis = grid.axis()
    aa, bb = np.meshgrid(axis, axis)
    with np.errstate(all="ignore"):
        loss = np.asarray(surface.evaluate(aa, bb), float) * np.ones_like(aa)
        g_ij, g_ik = surface.gradient(aa, bb)
        g_ij = np.asarray(g_ij, float) * np.ones_like(aa)
        g_ik = np.asarray(g_ik, float) * np.ones_like(aa)
        mag = np.hypot(g_ij, g_ik)
    mask = surface.invalid(aa, bb) | ~np.isfinite(loss) | ~np.isfinite(g_ij) | ~np.isfinite(g_ik)
    return RainbowGrid(surface.name, axis, axis.copy(), loss, g_ij, g_ik, mag, mask)


# -- principle checks --------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    """Thresholds for the finite-grid principle proxies.

    ``ratio``: P2/P3 direction ratio bound. ``small``: P4 magnitude bound as a
    fraction of the largest grid magnitude. ``decay_slope``: a P2/P3 ratio
    that is not yet below ``ratio`` still passes if its log-log slope over
    the large region is at most this (it is heading to zero).
    ``large_decades`` / ``small_decades``: widths of the "large" and "small"
    regions at the top and bottom of each axis. ``rtol``: relative noise
    floor for sign and monotonicity tests.
    """

    ratio: float = 0.05
    small: float = 0.05
    decay_slope: float = -0.5
    large_decades: float = 1.0
    small_decades: float = 1.0
    rtol: float = 1e-9


@dataclass
class Verdict:
    status: str  # "pass" | "fail" | "indeterminate"
    witnesses: list = field(default_factory=list)
    note: str = ""


@dataclass
class PrincipleReport:
    surface: str
    verdicts: dict
    tolerances: Tolerances
    grid: GridSpec

    def status(self, p):
        return self.verdicts[p].status

    def passes(self, p):
        return self.verdicts[p].status == "pass"

    def lines(self):
        out = [f"surface={self.surface}"]
        for p in sorted(self.verdicts):
            v = self.verdicts[p]
            line = f"P{p}={v.status}"
            if v.witnesses:
                w = v.witnesses[0]
                line += " witness=" + ";".join(f"{k}:{_fmt(val)}" for k, val in w.items())
            if v.note:
                line += f" note={v.note}"
            out.append(line)
        return out


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


_MAX_WITNESSES = 5


class _Collector:
    def __init__(self):
        self.fails = []
        self.masked = []

    def fail(self, **w):
        if len(self.fails) < _MAX_WITNESSES:
            self.fails.append({k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in w.items()})
        self.nfail = getattr(self, "nfail", 0) + 1

    def hole(self, **w):
        if len(self.masked) < _MAX_WITNESSES:
            self.masked.append({k: float(v) for k, v in w.items()})

    def verdict(self, note=""):
        if self.fails:
            return Verdict("fail", self.fails, note)
        if self.masked:
            return Verdict("indeterminate", self.masked, "masked cells in required region")
        return Verdict("pass", [], note)


def _ratio(num, den):
    num, den = abs(float(num)), abs(float(den))
    if num == 0.0 and den == 0.0:
        return None
    return math.inf if den == 0.0 else num / den


def _vanishing(coords, ratios, tol):
    """True when a ratio sequence ends below ``tol.ratio`` or decays fast enough toward zero."""
    if ratios[-1] < tol.ratio:
        return True
    if len(ratios) < 2 or not all(math.isfinite(r) and r > 0 for r in (ratios[0], ratios[-1])):
        return False
    slope = (math.log(ratios[-1]) - math.log(ratios[0])) / (math.log(coords[-1]) - math.log(coords[0]))
    return slope <= tol.decay_slope


def _increases(vals, rtol):
    """Signs of consecutive differences with a relative noise floor (0 = flat)."""
    vals = np.asarray(vals, float)
    d = np.diff(vals)
    floor = rtol * np.maximum(np.abs(vals[1:]), np.abs(vals[:-1]))
    return np.where(d > floor, 1, np.where(d < -floor, -1, 0))


def check_principles(surface, grid=GridSpec(), tol=Tolerances()):
    """Audit a triplet surface against principles 1-6 on a finite grid."""
    if grid.lo > 1e-2 or grid.hi < 1e2:
        raise ValueError("audit grid must cover at least [1e-2, 1e2]")
    rg = surface if isinstance(surface, RainbowGrid) else rainbow_grid(surface, grid)
    a, b = rg.d_ij, rg.d_ik
    gij, gik, mag, mask = rg.grad_ij, rg.grad_ik, rg.magnitude, rg.mask
    valid = ~mask
    gmax = float(np.max(mag[valid])) if valid.any() else 0.0
    atol = tol.rtol * gmax
    large_a = np.nonzero(a >= grid.hi / 10**tol.large_decades)[0]
    large_b = np.nonzero(b >= grid.hi / 10**tol.large_decades)[0]
    verdicts = {}

    # P1: dL/dd_ij >= 0 and dL/dd_ik <= 0 everywhere
    c = _Collector()
    for r, col in zip(*np.nonzero(mask)):
        c.hole(d_ij=a[col], d_ik=b[r])
        break
    for r, col in zip(*np.nonzero(valid & ((gij < -atol) | (gik > atol)))):
        c.fail(d_ij=a[col], d_ik=b[r], grad_ij=gij[r, col], grad_ik=gik[r, col])
    verdicts[1] = c.verdict()

    # P2: for every d_ij, |dL/dd_ik / dL/dd_ij| -> 0 as d_ik grows
    c = _Collector()
    for col in range(a.size):
        rows = [r for r in large_b if valid[r, col]]
        if len(rows) < large_b.size:
            c.hole(d_ij=a[col], d_ik=b[large_b[0]])
        pts = [(b[r], _ratio(gik[r, col], gij[r, col])) for r in rows]
        pts = [(x, q) for x, q in pts if q is not None]
        if pts and not _vanishing([x for x, _ in pts], [q for _, q in pts], tol):
            c.fail(d_ij=a[col], d_ik=pts[-1][0], ratio=pts[-1][1])
    verdicts[2] = c.verdict()

    # P3: for every d_ik, |dL/dd_ij / dL/dd_ik| -> 0 as d_ij grows
    c = _Collector()
    for r in range(b.size):
        cols = [col for col in large_a if valid[r, col]]
        if len(cols) < large_a.size:
            c.hole(d_ij=a[large_a[0]], d_ik=b[r])
        pts = [(a[col], _ratio(gij[r, col], gik[r, col])) for col in cols]
        pts = [(x, q) for x, q in pts if q is not None]
        if pts and not _vanishing([x for x, _ in pts], [q for _, q in pts], tol):
            c.fail(d_ij=pts[-1][0], d_ik=b[r], ratio=pts[-1][1])
    verdicts[3] = c.verdict()

    # P4: at the smallest d_ij and large d_ik both partials are small
    c = _Collector()
    bound = tol.small * gmax
    for r in large_b:
        if not valid[r, 0]:
            c.hole(d_ij=a[0], d_ik=b[r])
            continue
        if max(abs(gij[r, 0]), abs(gik[r, 0])) >= bound:
            c.fail(d_ij=a[0], d_ik=b[r], grad_ij=gij[r, 0], grad_ik=gik[r, 0], bound=bound)
    verdicts[4] = c.verdict()

    # P5: for every d_ij, the gradient magnitude is non-increasing in d_ik over the large region
    c = _Collector()
    for col in range(a.size):
        rows = [r for r in large_b if valid[r, col]]
        if len(rows) < large_b.size:
            c.hole(d_ij=a[col], d_ik=b[large_b[0]])
        if len(rows) < 2:
            continue
        s = _increases(mag[rows, col], tol.rtol)
        if np.any(s > 0):
            k = int(np.argmax(s > 0))
            c.fail(d_ij=a[col], d_ik=b[rows[k + 1]], magnitude=mag[rows[k + 1], col],
                   previous=mag[rows[k], col])
    verdicts[5] = c.verdict()

    # P6: magnitude unimodal in d_ij for every d_ik; decaying toward large d_ij when d_ik is large
    c = _Collector()
    for r in range(b.size):
        cols = np.nonzero(valid[r])[0]
        if cols.size < 2:
            continue
        s = _increases(mag[r, cols], tol.rtol)
        s = s[s != 0]
        if np.any((s[:-1] < 0) & (s[1:] > 0)):
            c.fail(d_ik=b[r], kind="not unimodal in d_ij")
    for r in large_b:
        cols = [col for col in large_a if valid[r, col]]
        if len(cols) < large_a.size:
            c.hole(d_ij=a[large_a[0]], d_ik=b[r])
        if len(cols) < 2:
            continue
        s = _increases(mag[r, cols], tol.rtol)
        if np.any(s > 0):
            k = int(np.argmax(s > 0))
            c.fail(d_ij=a[cols[k + 1]], d_ik=b[r], kind="magnitude grows with d_ij",
                   magnitude=mag[r, cols[k + 1]])
    verdicts[6] = c.verdict()

    return PrincipleReport(rg.name, verdicts, tol, grid)


# -- separable force profiles -----------------------------------------------


@dataclass
class Prop1Report:
    profile: str
    status: str
    checks: dict
    witnesses: dict

    @property
    def passed(self):
        return self.status == "pass"


def check_prop1(profile, domain=(1e-4, 1e4), n=2001, tol=0.05, rtol=1e-9):
    """Check non-negativity, unimodality and vanishing limits of ``f`` and ``g``.

    Limits are proxied by requiring the value at each end of ``domain`` to be
    below ``tol`` times the function's largest sampled value.
    """
    lo, hi = domain
    if not 0 < lo < hi:
        raise ValueError("domain must lie in (0, inf)")
    d = np.logspace(math.log10(lo), math.log10(hi), n)
    checks, witnesses = {}, {}
    status = "pass"
    for name, fn in (("f", profile.f), ("g", profile.g)):
        with np.errstate(all="ignore"):
            v = np.asarray(fn(d), float) * np.ones_like(d)
        if not np.all(np.isfinite(v)):
            checks[f"{name}_finite"] = False
            witnesses[f"{name}_finite"] = float(d[np.argmax(~np.isfinite(v))])
            status = "indeterminate"
            continue
        peak = float(v.max())
        nonneg = bool(np.all(v >= -rtol * max(abs(peak), 1e-300)))
        s = _increases(v, rtol)
        s = s[s != 0]
        unimodal = not bool(np.any((s[:-1] < 0) & (s[1:] > 0)))
        low_end = bool(v[0] < tol * peak) if peak > 0 else True
        high_end = bool(v[-1] < tol * peak) if peak > 0 else True
        for key, ok, where in (
            ("nonnegative", nonneg, float(d[np.argmin(v)])),
            ("unimodal", unimodal, None),
            ("vanishes_at_0", low_end, float(v[0])),
            ("vanishes_at_inf", high_end, float(v[-1])),
        ):
            checks[f"{name}_{key}"] = ok
            if not ok:
                witnesses[f"{name}_{key}"] = where
                if status == "pass":
                    status = "fail"
    return Prop1Report(profile.name, status, checks, witnesses)
