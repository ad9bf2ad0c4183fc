"""Reference curves, moving frames, the tube map and its metric."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from . import CSV_MARKER
from .cross_section.shapes import CrossSectionShape
from .errors import (DegenerateJacobian, GridTooCoarse, HypothesisViolated,
                     NonPositiveCurvature, OutOfDomain)
from .profiles import Profile

log = logging.getLogger(__name__)

ORTHO_DRIFT_LIMIT = 1e-6
ANGLE_CONSISTENCY = 1e-6


# ---------------------------------------------------------------------------
# curve and angle data


@dataclass(frozen=True, eq=False)
class CurveData:
    """Curvature and torsion sampled on an arc-length grid, cubic interpolation.

    Curvature must be non-negative. A point with zero curvature and nonzero
    torsion is rejected because the Frenet frame is undefined there.
    """

    s_grid: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        t = np.asarray(self.tau, dtype=float)
        if s.ndim != 1 or len(s) < 4:
            raise ValueError("s_grid needs at least four samples")
        if np.any(np.diff(s) <= 0):
            raise ValueError("s_grid must be strictly increasing")
        if k.shape != s.shape or t.shape != s.shape:
            raise ValueError("kappa and tau must match s_grid")
        if np.any(k < -1e-14):
            raise NonPositiveCurvature(f"negative curvature {k.min():.3e}")
        flat = k <= 1e-14
        if np.any(flat & (np.abs(t) > 1e-14)):
            raise NonPositiveCurvature("zero curvature with nonzero torsion: no Frenet frame")
        for name, arr in (("s_grid", s), ("kappa", k), ("tau", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @cached_property
    def kappa_spline(self) -> CubicSpline:
        return CubicSpline(self.s_grid, self.kappa)

    @cached_property
    def tau_spline(self) -> CubicSpline:
        return CubicSpline(self.s_grid, self.tau)

    def kappa_at(self, s):
        return self.kappa_spline(s)

    def tau_at(self, s):
        return self.tau_spline(s)

    @property
    def span(self):
        return float(self.s_grid[0]), float(self.s_grid[-1])

    def kappa_sup(self) -> float:
        """Sup of |kappa| over the spline, sampled at nodes and 8 points per cell."""
        s = self.s_grid
        fine = np.concatenate([s, (s[:-1, None] + np.diff(s)[:, None] * np.linspace(0, 1, 9)[1:-1]).ravel()])
        return float(np.max(np.abs(self.kappa_at(fine))))

    @classmethod
    def from_functions(cls, kappa: Callable, tau: Callable, s_grid) -> "CurveData":
        s = np.asarray(s_grid, dtype=float)
        return cls(s, np.asarray(kappa(s), float) * np.ones_like(s),
                   np.asarray(tau(s), float) * np.ones_like(s))


def _grid(lo, hi, ds):
    n = max(int(np.ceil((hi - lo) / ds)), 4)
    return np.linspace(lo, hi, n + 1)


def line_curve(lo: float = -10.0, hi: float = 10.0, ds: float = 0.05) -> CurveData:
    s = _grid(lo, hi, ds)
    return CurveData(s, np.zeros_like(s), np.zeros_like(s))


def circle_curve(radius: float = 1.0, lo: float = 0.0, hi: float = 2 * np.pi, ds: float = 0.01):
    s = _grid(lo, hi, ds)
    return CurveData(s, np.full_like(s, 1.0 / radius), np.zeros_like(s))


def helix_curve(kappa: float = 1.0, tau: float = 1.0, lo: float = 0.0, hi: float = 10.0,
                ds: float = 0.01) -> CurveData:
    s = _grid(lo, hi, ds)
    return CurveData(s, np.full_like(s, kappa), np.full_like(s, tau))


def bump_kappa(kappa0: float, width: float = 1.0, center: float = 0.0):
    """kappa0 * exp(-1/(1 - x^2)) with x = (s - center)/width, zero for |x| >= 1."""
    def f(s):
        x = (np.asarray(s, dtype=float) - center) / width
        out = np.zeros_like(x)
        m = np.abs(x) < 1
        out[m] = kappa0 * np.exp(-1.0 / (1.0 - x[m] ** 2))
        return out
    return f


def bump_curve(kappa0: float, width: float = 1.0, lo: float = -10.0, hi: float = 10.0,
               ds: float = 0.01, center: float = 0.0) -> CurveData:
    """Planar curve whose curvature is a compactly supported smooth bump."""
    s = _grid(lo, hi, ds)
    return CurveData(s, bump_kappa(kappa0, width, center)(s), np.zeros_like(s))


def mild_curve(eps0: float, lo: float = -10.0, hi: float = 10.0, ds: float = 0.01) -> CurveData:
    """Planar curve with curvature eps0 / (1 + s^2)."""
    s = _grid(lo, hi, ds)
    return CurveData(s, eps0 / (1.0 + s ** 2), np.zeros_like(s))


@dataclass(frozen=True, eq=False)
class AngleFunction:
    """Rotation angle theta of the cross-section and its derivative.

    theta_dot is interpolated by a cubic spline and theta is the exact
    antiderivative of that spline, so derivative and angle agree at every s.
    The supplied theta samples are checked against it to relative
    tolerance 1e-6.
    """

    s_grid: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_grid, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        td = np.asarray(self.theta_dot, dtype=float)
        if th.shape != s.shape or td.shape != s.shape:
            raise ValueError("theta and theta_dot must match s_grid")
        for name, arr in (("s_grid", s), ("theta", th), ("theta_dot", td)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        integ = self._theta_poly(s)
        scale = max(1.0, float(np.max(np.abs(th))))
        err = float(np.max(np.abs(integ - th)))
        if err > ANGLE_CONSISTENCY * scale:
            raise ValueError(f"theta_dot inconsistent with theta (max deviation {err:.3e})")

    @cached_property
    def _dot_spline(self) -> CubicSpline:
        return CubicSpline(self.s_grid, self.theta_dot)

    @cached_property
    def _theta_poly(self):
        anti = self._dot_spline.antiderivative()
        off = self.theta[0] - anti(self.s_grid[0])
        return lambda s: anti(s) + off

    def theta_at(self, s):
        return self._theta_poly(s)

    def theta_dot_at(self, s):
        return self._dot_spline(s)

    @classmethod
    def from_rate(cls, s_grid, theta_dot, theta0: float = 0.0) -> "AngleFunction":
        s = np.asarray(s_grid, dtype=float)
        td = np.asarray(theta_dot, dtype=float) * np.ones_like(s)
        anti = CubicSpline(s, td).antiderivative()
        th = theta0 + anti(s) - anti(s[0])
        return cls(s, th, td)

    @classmethod
    def constant(cls, s_grid, theta0: float = 0.0) -> "AngleFunction":
        s = np.asarray(s_grid, dtype=float)
        return cls(s, np.full_like(s, theta0), np.zeros_like(s))

    @classmethod
    def from_profile(cls, s_grid, rate: Profile, theta0: float = 0.0) -> "AngleFunction":
        return cls.from_rate(s_grid, rate(np.asarray(s_grid, float)), theta0)

    def shifted(self, beta: float) -> "AngleFunction":
        """theta - beta with the same derivative."""
        return AngleFunction(self.s_grid, self.theta - beta, self.theta_dot)


def tang_frame_angle(curve: CurveData, theta0: float = 0.0) -> AngleFunction:
    """Angle with theta' = tau, which removes the twist term tau - theta'."""
    return AngleFunction.from_rate(curve.s_grid, curve.tau, theta0)


# ---------------------------------------------------------------------------
# frames


def _generator(kappa, tau, theta, theta_dot):
    c, s = np.cos(theta), np.sin(theta)
    w = tau - theta_dot
    return np.array([[0.0, kappa * c, kappa * s],
                     [-kappa * c, 0.0, w],
                     [-kappa * s, -w, 0.0]])


def _polar(F):
    U, _, Vt = np.linalg.svd(F)
    return U @ Vt


def initial_frame(theta0: float) -> np.ndarray:
    """Rows e1, e2 cos - e3 sin, e2 sin + e3 cos for the standard basis."""
    c, s = np.cos(theta0), np.sin(theta0)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True, eq=False)
class FrameField:
    """Rotated frames (rows e1, e2^theta, e3^theta) and curve points on a grid."""

    s_grid: np.ndarray
    frames: np.ndarray  # (n, 3, 3)
    points: np.ndarray  # (n, 3)
    curve: CurveData = field(repr=False)
    angle: AngleFunction = field(repr=False)

    def _rhs(self, s, F):
        k = float(self.curve.kappa_at(s))
        A = _generator(k, float(self.curve.tau_at(s)), float(self.angle.theta_at(s)),
                       float(self.angle.theta_dot_at(s)))
        return A @ F

    def at(self, s: float):
        """Frame and curve point at arbitrary s (one RK4 step from the nearest node)."""
        lo, hi = self.s_grid[0], self.s_grid[-1]
        if not lo - 1e-12 <= s <= hi + 1e-12:
            raise OutOfDomain(f"s={s} outside [{lo}, {hi}]")
        i = int(np.clip(np.searchsorted(self.s_grid, s) - 1, 0, len(self.s_grid) - 2))
        if abs(self.s_grid[i + 1] - s) < abs(s - self.s_grid[i]):
            i += 1
        s0 = float(self.s_grid[i])
        if s == s0:
            return self.frames[i].copy(), self.points[i].copy()
        F, x = _rk4_step(self._rhs, s0, s - s0, self.frames[i], self.points[i])
        return _polar(F), x


def _rk4_step(rhs, s, h, F, x):
    k1 = rhs(s, F)
    k2 = rhs(s + h / 2, F + h / 2 * k1)
    k3 = rhs(s + h / 2, F + h / 2 * k2)
    k4 = rhs(s + h, F + h * k3)
    Fn = F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    # the position follows e1, whose RK stages are the first rows above
    xn = x + h / 6 * (F[0] + 2 * (F + h / 2 * k1)[0] + 2 * (F + h / 2 * k2)[0] + (F + h * k3)[0])
    return Fn, xn


def integrate_frame(curve: CurveData, angle: AngleFunction) -> FrameField:
    """Integrate the rotated-frame equations with RK4 and polar re-orthonormalization.

    Straight pieces (kappa = 0, tau = 0) need no special handling: the
    generator vanishes apart from the twist term and the frame is glued
    continuously across them.
    """
    s = curve.s_grid
    if angle.s_grid.shape != s.shape or np.any(angle.s_grid != s):
        raise ValueError("curve and angle must share the arc-length grid")
    n = len(s)
    frames = np.empty((n, 3, 3))
    points = np.empty((n, 3))
    frames[0] = initial_frame(float(angle.theta[0]))
    points[0] = 0.0
    kap, tau = curve.kappa_spline, curve.tau_spline
    th, td = angle.theta_at, angle.theta_dot_at
    # evaluate coefficients at nodes and midpoints in one go
    mids = 0.5 * (s[:-1] + s[1:])
    kn, km = kap(s), kap(mids)
    wn, wm = tau(s) - td(s), tau(mids) - td(mids)
    thn, thm = th(s), th(mids)

    def gen(k, w, t):
        c, si = np.cos(t), np.sin(t)
        return np.array([[0.0, k * c, k * si], [-k * c, 0.0, w], [-k * si, -w, 0.0]])

    I3 = np.eye(3)
    for i in range(n - 1):
        h = s[i + 1] - s[i]
        A0 = gen(kn[i], wn[i], thn[i])
        Am = gen(km[i], wm[i], thm[i])
        A1 = gen(kn[i + 1], wn[i + 1], thn[i + 1])
        F = frames[i]
        k1 = A0 @ F
        F2 = F + h / 2 * k1
        k2 = Am @ F2
        F3 = F + h / 2 * k2
        k3 = Am @ F3
        F4 = F + h * k3
        k4 = A1 @ F4
        Fn = F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        points[i + 1] = points[i] + h / 6 * (F[0] + 2 * F2[0] + 2 * F3[0] + F4[0])
        drift = float(np.max(np.abs(Fn @ Fn.T - I3)))
        if drift > ORTHO_DRIFT_LIMIT:
            raise GridTooCoarse(f"orthonormality drift {drift:.2e} at s={s[i]:.4g}; refine s_grid")
        frames[i + 1] = _polar(Fn)
    frames.setflags(write=False)
    points.setflags(write=False)
    return FrameField(s, frames, points, curve, angle)


def curve_roundtrip(frame: FrameField, min_kappa: float = 1e-3):
    """Re-differentiate the reconstructed curve and compare with the prescribed data.

    Fourth-order central differences of the curve points give the first
    three derivatives on a uniform stretch of the grid. Returns the maximum
    errors of kappa and of tau (tau only where kappa > min_kappa).
    """
    s = frame.s_grid
    ds = np.diff(s)
    if not np.allclose(ds, ds[0], rtol=1e-9, atol=0):
        raise ValueError("round-trip check needs a uniform grid")
    h = ds[0]
    X = frame.points
    i = np.arange(3, len(s) - 3)
    d1 = (X[i - 2] - 8 * X[i - 1] + 8 * X[i + 1] - X[i + 2]) / (12 * h)
    d2 = (-X[i - 2] + 16 * X[i - 1] - 30 * X[i] + 16 * X[i + 1] - X[i + 2]) / (12 * h ** 2)
    d3 = (X[i - 3] - 8 * X[i - 2] + 13 * X[i - 1] - 13 * X[i + 1] + 8 * X[i + 2] - X[i + 3]) / (8 * h ** 3)
    cr = np.cross(d1, d2)
    speed = np.linalg.norm(d1, axis=1)
    k_num = np.linalg.norm(cr, axis=1) / speed ** 3
    k_err = float(np.max(np.abs(k_num - frame.curve.kappa[i])))
    mask = frame.curve.kappa[i] > min_kappa
    if np.any(mask):
        t_num = np.einsum("ij,ij->i", cr, d3)[mask] / np.linalg.norm(cr[mask], axis=1) ** 2
        t_err = float(np.max(np.abs(t_num - frame.curve.tau[i][mask])))
    else:
        t_err = 0.0
    return k_err, t_err


# ---------------------------------------------------------------------------
# tube


@dataclass(frozen=True, eq=False)
class TubeSpec:
    """Curve, angle, cross-section and truncation half-length of a tube.

    The arc-length window is [-L, L] unless ``s_range`` is given.
    """

    curve: CurveData
    angle: AngleFunction
    shape: CrossSectionShape
    half_length: float
    s_range: Optional[tuple] = None
    validate: bool = True

    def __post_init__(self):
        lo, hi = self.window
        if lo < self.curve.s_grid[0] - 1e-12 or hi > self.curve.s_grid[-1] + 1e-12:
            raise OutOfDomain(f"window [{lo}, {hi}] exceeds the curve data range {self.curve.span}")
        if self.validate:
            margin = 1.0 - self.a * self.curve.kappa_sup()
            if margin <= 0:
                raise HypothesisViolated(
                    f"a*sup|kappa| = {1 - margin:.4g} >= 1", "a*kappa_sup", 1 - margin)

    @property
    def window(self):
        if self.s_range is not None:
            return float(self.s_range[0]), float(self.s_range[1])
        return -float(self.half_length), float(self.half_length)

    @property
    def a(self) -> float:
        return self.shape.farthest_radius

    @cached_property
    def frame(self) -> FrameField:
        return integrate_frame(self.curve, self.angle)

    def twist_rate(self, s):
        """tau - theta_dot."""
        return self.curve.tau_at(s) - self.angle.theta_dot_at(s)

    def rotated(self, beta: float) -> "TubeSpec":
        """Same tube with the shape rotated by beta and theta shifted by -beta."""
        return TubeSpec(self.curve, self.angle.shifted(beta), self.shape.rotate(beta),
                        self.half_length, self.s_range, self.validate)

    def scaled(self, eps: float) -> "TubeSpec":
        return TubeSpec(self.curve, self.angle, self.shape.scale(eps), self.half_length,
                        self.s_range, self.validate)


def tube_map(spec: TubeSpec, s: float, t) -> np.ndarray:
    """Gamma(s) + t2 e2^theta(s) + t3 e3^theta(s)."""
    t = np.asarray(t, dtype=float)
    if np.hypot(*t) > spec.a * (1 + 1e-9):
        raise OutOfDomain(f"t={t} lies outside the cross-section")
    F, x = spec.frame.at(float(s))
    return x + t[0] * F[1] + t[1] * F[2]


@dataclass(frozen=True)
class MetricSample:
    h: float
    h2: float
    h3: float
    G: np.ndarray
    G_inv: np.ndarray


def metric_fields(spec: TubeSpec, s, t2, t3):
    """Vectorized h, h2, h3 at broadcastable (s, t2, t3)."""
    s = np.asarray(s, dtype=float)
    k = spec.curve.kappa_at(s)
    th = spec.angle.theta_at(s)
    w = spec.twist_rate(s)
    h = 1.0 - (t2 * np.cos(th) + t3 * np.sin(th)) * k
    return h, -t3 * w, t2 * w


def metric_at(spec: TubeSpec, s: float, t) -> MetricSample:
    t2, t3 = (float(x) for x in t)
    h, h2, h3 = (float(x) for x in metric_fields(spec, s, t2, t3))
    if h <= 0:
        raise DegenerateJacobian(f"h={h:.3e} <= 0 at s={s}, t={t}")
    G = np.array([[h * h + h2 * h2 + h3 * h3, h2, h3], [h2, 1.0, 0.0], [h3, 0.0, 1.0]])
    Gi = np.array([[1.0, -h2, -h3],
                   [-h2, h * h + h2 * h2, h2 * h3],
                   [-h3, h2 * h3, h * h + h3 * h3]]) / (h * h)
    return MetricSample(h, h2, h3, G, Gi)


def metric_by_differences(spec: TubeSpec, s: float, t, step: float = 1e-5) -> np.ndarray:
    """Metric tensor from central differences of the tube map (for cross-checks)."""
    t = np.asarray(t, dtype=float)
    cols = []
    for k in range(3):
        d = np.zeros(3)
        d[k] = step
        p = tube_map(spec, s + d[0], t + d[1:])
        m = tube_map(spec, s - d[0], t - d[1:])
        cols.append((p - m) / (2 * step))
    J = np.stack(cols, 1)
    return J.T @ J


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class HypothesisReport:
    a: float
    kappa_sup: float
    margin: float
    samples: int
    close_pairs: int
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def _sample_shape(shape: CrossSectionShape, n: int, rng) -> np.ndarray:
    a = shape.farthest_radius
    out = []
    while sum(len(x) for x in out) < n:
        p = rng.uniform(-a, a, size=(2 * n, 2))
        out.append(p[shape.contains(p)])
    return np.vstack(out)[:n]


def check_hypotheses(spec: TubeSpec, sample_count: int = 4000, seed: int = 0) -> HypothesisReport:
    """Check a*sup|kappa| < 1 and look for sampled self-intersections.

    Raises HypothesisViolated naming the failing quantity.
    """
    a = spec.a
    ksup = spec.curve.kappa_sup()
    margin = 1.0 - a * ksup
    if margin <= 0:
        raise HypothesisViolated(f"a*sup|kappa| = {a * ksup:.4g} >= 1", "a*kappa_sup", a * ksup)
    rng = np.random.default_rng(seed)
    lo, hi = spec.window
    s = rng.uniform(lo, hi, sample_count)
    t = _sample_shape(spec.shape, sample_count, rng)
    order = np.argsort(s)
    s, t = s[order], t[order]
    fr = spec.frame
    pts = np.empty((sample_count, 3))
    for i in range(sample_count):
        F, x = fr.at(float(s[i]))
        pts[i] = x + t[i, 0] * F[1] + t[i, 1] * F[2]
    diam = max(float(np.ptp(pts, axis=0).max()), 2 * a)
    pairs = cKDTree(pts).query_pairs(1e-9 * diam, output_type="ndarray")
    floor = max(float(np.max(np.diff(spec.curve.s_grid))), 1e-3 * a)
    bad = 0
    for i, j in pairs:
        dpar = np.hypot(s[i] - s[j], np.linalg.norm(t[i] - t[j]))
        if dpar > floor:
            bad += 1
    if bad:
        raise HypothesisViolated(f"{bad} sampled pairs map to the same point", "injectivity", bad)
    return HypothesisReport(a, ksup, margin, sample_count, 0, True)


# ---------------------------------------------------------------------------
# ruled surface


def ruled_surface_gauss_curvature(spec: TubeSpec, s: float, step: float = 1e-3) -> float:
    """Gauss curvature of (s, r) -> Gamma(s) + r e2^theta(s) at r = a/2.

    The surface is linear in r, so the second fundamental form has no rr
    entry and K = -M^2 / (EG - F^2). Derivatives in s are central differences.
    """
    lo, hi = spec.curve.span
    if not lo + step <= s <= hi - step:
        raise OutOfDomain(f"s={s} too close to the ends of the curve data")
    r = 0.5 * spec.a
    fr = spec.frame
    Fm, xm = fr.at(s - step)
    F0, x0 = fr.at(s)
    Fp, xp = fr.at(s + step)
    Xm, X0, Xp = xm + r * Fm[1], x0 + r * F0[1], xp + r * Fp[1]
    Xs = (Xp - Xm) / (2 * step)
    Xss = (Xp - 2 * X0 + Xm) / step ** 2
    Xr = F0[1]
    Xsr = (Fp[1] - Fm[1]) / (2 * step)
    n = np.cross(Xs, Xr)
    nn = np.linalg.norm(n)
    if nn == 0:
        raise DegenerateJacobian("degenerate ruled surface")
    n /= nn
    E, Fc, G = Xs @ Xs, Xs @ Xr, Xr @ Xr
    L_, M_ = Xss @ n, Xsr @ n
    return float((L_ * 0.0 - M_ * M_) / (E * G - Fc * Fc))


def gauss_curvature_formula(spec: TubeSpec, s: float, r: Optional[float] = None) -> float:
    """Closed form -w^2 / ((1 - r kappa cos theta)^2 + r^2 w^2)^2 with w = tau - theta'."""
    r = 0.5 * spec.a if r is None else r
    w = float(spec.twist_rate(s))
    k = float(spec.curve.kappa_at(s))
    th = float(spec.angle.theta_at(s))
    return -w * w / ((1 - r * k * np.cos(th)) ** 2 + r * r * w * w) ** 2


# ---------------------------------------------------------------------------
# export


def export_frames_csv(frame: FrameField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        fh.write(CSV_MARKER + "\n")
        w.writerow(["s"] + [f"F{i}{j}" for i in range(1, 4) for j in range(1, 4)])
        for s, F in zip(frame.s_grid, frame.frames):
            w.writerow([repr(float(s))] + [repr(float(x)) for x in F.ravel()])


def export_metric_csv(spec: TubeSpec, s_values, t_points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        fh.write(CSV_MARKER + "\n")
        w.writerow(["s", "t2", "t3", "h", "h2", "h3"])
        for s in s_values:
            for t2, t3 in t_points:
                h, h2, h3 = metric_fields(spec, s, t2, t3)
                w.writerow([repr(float(x)) for x in (s, t2, t3, h, h2, h3)])
