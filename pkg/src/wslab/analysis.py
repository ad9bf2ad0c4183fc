"""Experiments checking the spectral effects of bending and twisting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .assembly import (AssembledForm, Indicator, TubeDiscretization, assemble_full_tube,
                       assemble_straight_twisted, assemble_weighted_mass, graded_grid,
                       hardy_weight, uniform_grid)
from .cross_section.mesh import Mesh2D
from .cross_section.modes import cached_ground_mode
from .cross_section.shapes import is_rotationally_invariant
from .errors import (HypothesisViolated, InvariantCrossSection, NoCertificateFound,
                     OverlappingPartition)
from .geometry import TubeSpec
from .profiles import Hat, Profile
from .spectral import cutoff, lambda_alpha_I, lowest_eigenpairs

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# bending certificate


@dataclass
class BendingCertificate:
    """Negative value of the shifted form at psi_n + epsilon * chi.

    ``value`` is Q[psi] - E1 ||psi||^2 with the weighted norm; a negative
    value proves that the spectrum starts below E1. ``rayleigh`` is the
    Rayleigh quotient of the same vector, an upper bound for the lowest
    eigenvalue of the discrete problem on ``disc``.
    """

    n: int
    epsilon: float
    xi: Profile
    value: float
    rayleigh: float
    E1: float
    norm2: float
    history: list = field(default_factory=list)
    disc: Optional[TubeDiscretization] = field(default=None, repr=False)
    vector: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "epsilon": self.epsilon, "xi": self.xi.to_dict(),
                "value": self.value, "rayleigh_quotient": self.rayleigh, "E1": self.E1,
                "norm2": self.norm2, "history": self.history}


def _positive_interval(spec: TubeSpec):
    """Longest interval of the s-grid on which kappa is positive."""
    s = spec.curve.s_grid
    lo, hi = spec.window
    mask = (spec.curve.kappa > 1e-12) & (s >= lo) & (s <= hi)
    if not np.any(mask):
        raise NoCertificateFound("curvature vanishes identically: no negative direction")
    best, cur = None, None
    for i, m in enumerate(mask):
        if m and cur is None:
            cur = i
        if (not m or i == len(mask) - 1) and cur is not None:
            j = i if m else i - 1
            if best is None or s[j] - s[cur] > s[best[1]] - s[best[0]]:
                best = (cur, j)
            cur = None
    return float(s[best[0]]), float(s[best[1]])


def bending_direction(disc: TubeDiscretization, spec: TubeSpec, xi: Profile) -> np.ndarray:
    """Nodal vector of xi(s) (t2 cos theta(s) + t3 sin theta(s)) J1(t)."""
    mesh = disc.mesh
    J = cached_ground_mode(mesh).interior
    t = mesh.nodes[mesh.interior]
    s = disc.active_nodes
    th = spec.angle.theta_at(s)
    proj = np.cos(th)[:, None] * t[None, :, 0] + np.sin(th)[:, None] * t[None, :, 1]
    return (xi(s)[:, None] * proj * J[None, :]).ravel()


def certify_bending(spec: TubeSpec, mesh: Mesh2D, ds_core: float = 0.05,
                    schedule: Optional[Sequence[int]] = None, far_cells: int = 48,
                    xi: Optional[Profile] = None) -> BendingCertificate:
    """Search n in 8, 16, 32, ... for a negative value of Q_1 at psi_n + eps chi.

    For each n the tube is discretized on [-n, n] (Dirichlet ends) with a
    grid that is fine on the bent part and graded towards the ends. The
    optimal eps is found in closed form since Q_1 is quadratic in eps.
    """
    lo, hi = spec.window
    w = spec.twist_rate(spec.curve.s_grid)
    if np.max(np.abs(w)) > 1e-10:
        raise HypothesisViolated("certificate needs tau - theta' = 0", "twist", float(np.max(np.abs(w))))
    a, b = _positive_interval(spec)
    if xi is None:
        xi = Hat(0.5 * (a + b), 0.5 * (b - a))
    E1 = cached_ground_mode(mesh).E1
    L = min(-lo, hi)
    if schedule is None:
        schedule = [8 * 2 ** j for j in range(20) if 8 * 2 ** j <= L]
    history = []
    for n in schedule:
        if n > L:
            break
        core = (min(a, -0.5 * n), max(b, 0.5 * n)) if n * 0.5 < 4 * (b - a) else (a, b)
        s = graded_grid(-n, n, (min(core[0], a - ds_core), max(core[1], b + ds_core)),
                        ds_core, max(n / far_cells, ds_core))
        disc = TubeDiscretization(s, mesh, "dirichlet")
        form = assemble_full_tube(spec, disc)
        Q1 = form.shifted(E1)
        J = cached_ground_mode(mesh).interior
        psi = disc.product(cutoff(disc.active_nodes / n), J)
        chi = bending_direction(disc, spec, xi)
        Qpsi, Qchi = Q1.A @ psi, Q1.A @ chi
        q0, q01, q11 = float(psi @ Qpsi), float(chi @ Qpsi), float(chi @ Qchi)
        if q11 <= 0:
            eps = -np.sign(q01) if q01 else 1.0
        else:
            eps = -q01 / q11
        vec = psi + eps * chi
        value = float(vec @ (Q1.A @ vec))
        norm2 = float(vec @ (form.B @ vec))
        history.append({"n": int(n), "q0": q0, "q01": q01, "q11": q11, "epsilon": float(eps),
                        "value": value})
        log.info("certificate n=%d value=%.3e", n, value)
        if value < 0:
            return BendingCertificate(int(n), float(eps), xi, value, E1 + value / norm2, E1,
                                      norm2, history, disc, vec)
    raise NoCertificateFound(f"no negative value for n in {list(schedule)} (last history {history[-1:]})")


# ---------------------------------------------------------------------------
# Hardy constant


@dataclass
class HardyScanResult:
    """Largest c with A - E1 B - c W positive semidefinite (W: weight 1/(1+(s-s0)^2))."""

    c_star: float
    s0: float
    support: tuple
    history: list
    lambda_J: float
    pencil_check: Optional[float]
    invariant: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"c_star": self.c_star, "s0": self.s0, "support": list(self.support),
                "weight": "1/(1+(s-s0)^2)", "lambda_J": self.lambda_J,
                "pencil_check": self.pencil_check, "invariant_cross_section": self.invariant,
                "history": self.history, "meta": self.meta}


def profile_support(alpha: Profile, interval, n: int = 40001, tol: float = 0.0):
    """Closed hull of the set where alpha is nonzero, sampled on ``interval``."""
    sup = getattr(alpha, "support", None)
    if sup is not None:
        return (max(sup[0], interval[0]), min(sup[1], interval[1]))
    s = np.linspace(interval[0], interval[1], n)
    nz = np.flatnonzero(np.abs(alpha(s)) > tol)
    if len(nz) == 0:
        raise ValueError("alpha vanishes on the interval")
    return float(s[max(nz[0] - 1, 0)]), float(s[min(nz[-1] + 1, n - 1)])


def hardy_grid(interval, support, ds_core: float, ds_far: float) -> np.ndarray:
    """Grid fine on the support of the twist and graded outside, with J's ends as nodes."""
    lo, hi = interval
    return graded_grid(lo, hi, support, ds_core, ds_far, 1.1)


def hardy_scan(alpha: Profile, interval, mesh: Mesh2D, s0: Optional[float] = None,
               ds_core: float = 0.1, ds_far: float = 1.0, steps: int = 40,
               tol: float = 1e-9, control: bool = False,
               s_nodes: Optional[np.ndarray] = None) -> HardyScanResult:
    """Bisect for the Hardy constant of the twisted straight tube with natural ends.

    The upper end starts at lambda(alpha, J) (1 + |J|^2/4) and doubles until
    the shifted pencil is indefinite. Positive semidefiniteness is decided by
    the inertia of A - E1 B - c W + tol B. For a rotationally invariant
    cross-section the scan is vacuous: InvariantCrossSection is raised unless
    ``control`` is set, in which case the (near zero) result is returned with
    ``invariant=True``.
    """
    invariant = mesh.shape is not None and is_rotationally_invariant(mesh.shape)
    if invariant and not control:
        raise InvariantCrossSection("rotationally invariant cross-section: no Hardy inequality")
    lo, hi = float(interval[0]), float(interval[1])
    J = profile_support(alpha, (lo, hi))
    if s0 is None:
        s0 = 0.5 * (J[0] + J[1])
    s = hardy_grid((lo, hi), J, ds_core, ds_far) if s_nodes is None else np.asarray(s_nodes)
    disc = TubeDiscretization(s, mesh, "natural")
    E1 = cached_ground_mode(mesh).E1
    form = assemble_straight_twisted(alpha, disc).shifted(E1)
    W = assemble_weighted_mass(disc, hardy_weight(s0))
    coords = disc.coordinates()
    sJ = s[(s >= J[0] - 1e-12) & (s <= J[1] + 1e-12)]
    lam_J = lambda_alpha_I(alpha, J, mesh, s_nodes=sJ)

    def psd(c: float) -> bool:
        S = form.A - c * W + tol * form.B
        return linalg.inertia(S, coords)[0] == 0

    history = []
    if not psd(0.0):
        log.warning("shifted form is not positive semidefinite at c = 0")
        return HardyScanResult(0.0, s0, J, [{"c": 0.0, "psd": False}], lam_J, None, invariant)
    c_lo = 0.0
    c_hi = max(lam_J, 0.0) * (1.0 + (J[1] - J[0]) ** 2 / 4.0)
    if c_hi <= 0:
        c_hi = 1e-6
    for _ in range(60):
        ok = psd(c_hi)
        history.append({"c": c_hi, "psd": ok})
        if not ok:
            break
        c_lo, c_hi = c_hi, 2.0 * c_hi
    else:
        raise InvariantCrossSection("no upper bound found for the Hardy constant")
    for _ in range(steps):
        mid = 0.5 * (c_lo + c_hi)
        ok = psd(mid)
        history.append({"c": mid, "psd": ok})
        if ok:
            c_lo = mid
        else:
            c_hi = mid
    try:
        pencil = float(linalg.lowest(form.A, W, 1, lower_bound=None, coords=coords).values[0])
    except Exception as exc:  # cross-check only
        log.warning("pencil cross-check failed: %s", exc)
        pencil = None
    meta = {"n_s_nodes": int(len(s)), "h_mesh": mesh.h_mesh, "interval": [lo, hi], "E1": E1}
    return HardyScanResult(float(c_lo), float(s0), J, history, float(lam_J), pencil, invariant, meta)


# ---------------------------------------------------------------------------
# partitioned lower bound


@dataclass
class PartitionBound:
    intervals: list
    lambdas: list
    min_slack_random: float
    slack_ground: float
    ground_value: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def partition_lower_bound(alpha, interval, partition, mesh: Mesh2D, ds: float = 0.1,
                          n_random: int = 100, seed: int = 0, tol: float = 1e-8,
                          s_nodes: Optional[np.ndarray] = None) -> PartitionBound:
    """Verify psi^T (A - E1 B) psi >= sum_j lambda(alpha, I_j) psi^T M_j psi.

    The partition endpoints are inserted as grid nodes, so the restriction of
    any discrete function to I_j lies in the natural-ends space on I_j.
    """
    parts = sorted((float(a), float(b)) for a, b in partition)
    for (a0, b0), (a1, b1) in zip(parts[:-1], parts[1:]):
        if a1 < b0:
            raise OverlappingPartition(f"intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
    lo, hi = float(interval[0]), float(interval[1])
    for a, b in parts:
        if a < lo - 1e-12 or b > hi + 1e-12 or b <= a:
            raise OverlappingPartition(f"interval ({a}, {b}) is not inside ({lo}, {hi})")
    if s_nodes is None:
        breaks = sorted({lo, hi, *[x for p in parts for x in p]})
        s = np.unique(np.concatenate([uniform_grid(a, b, ds) for a, b in zip(breaks[:-1], breaks[1:])]))
    else:
        s = np.asarray(s_nodes, float)
    disc = TubeDiscretization(s, mesh, "natural")
    E1 = cached_ground_mode(mesh).E1
    form = assemble_straight_twisted(alpha, disc).shifted(E1)
    lams, mats = [], []
    for a, b in parts:
        sub = disc.restrict(a, b)
        lams.append(lambda_alpha_I(alpha, (a, b), mesh, s_nodes=sub.s_nodes))
        mats.append(assemble_weighted_mass(disc, Indicator(a, b)))
    rhs = sum(l * M for l, M in zip(lams, mats))

    def slack(v):
        return float(v @ (form.A @ v) - v @ (rhs @ v))

    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(n_random):
        v = rng.standard_normal(disc.size)
        v /= np.sqrt(v @ (form.B @ v))
        worst = min(worst, slack(v))
    rep = lowest_eigenpairs(form, 1)
    g = rep.vectors[:, 0]
    sg = slack(g)
    return PartitionBound(parts, [float(x) for x in lams], float(worst), sg,
                          float(rep.eigenvalues[0]), bool(worst >= -tol and sg >= -tol))


# ---------------------------------------------------------------------------
# mild bending


def g_function(kappa_abs, a: float):
    """g = h_- / h_+^2 - h_+ with h_pm = 1 pm a |kappa|.

    Evaluated as -(4x + 3x^2 + x^3) / (1 + x)^2, x = a |kappa|, which avoids
    the cancellation of the defining expression for small x.
    """
    x = a * np.asarray(kappa_abs, float)
    return -x * (4.0 + x * (3.0 + x)) / (1.0 + x) ** 2


def sufficient_condition(s, kappa_abs, a: float, E1: float, c_star: float, s0: float):
    """Pointwise value of (1-a k)/(1+a k)^2 c/(1+(s-s0)^2) + E1 g(s), k = sup|kappa|."""
    ksup = float(np.max(kappa_abs))
    pref = (1 - a * ksup) / (1 + a * ksup) ** 2
    return pref * c_star / (1.0 + (np.asarray(s) - s0) ** 2) + E1 * g_function(kappa_abs, a)


@dataclass
class MildBendingResult:
    eps0: list
    lowest: list
    threshold_ok: list
    condition_ok: list
    eps0_certified: float
    E1: float
    c_star: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def certified_eps0(s_grid, a: float, E1: float, c_star: float, s0: float,
                   kappa_shape=lambda s: 1.0 / (1.0 + np.asarray(s) ** 2),
                   upper: float = None, steps: int = 60) -> float:
    """Largest eps0 for which the sufficient condition holds on the grid (bisection)."""
    s_grid = np.asarray(s_grid, float)
    base = np.abs(kappa_shape(s_grid))
    upper = (1.0 / (a * base.max())) if upper is None else upper

    def ok(e):
        return bool(np.all(sufficient_condition(s_grid, e * base, a, E1, c_star, s0) >= 0))

    if not ok(0.0):
        return 0.0
    lo, hi = 0.0, upper * (1 - 1e-12)
    if ok(hi):
        return hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def mild_bending_scan(make_spec, eps0_list, mesh: Mesh2D, c_star: float, s0: float = 0.0,
                      ds: float = 0.1, tol: float = 1e-9, s_nodes=None) -> MildBendingResult:
    """Lowest eigenvalue of the full tube for each eps0 and the sufficient condition.

    ``make_spec(eps0)`` returns the TubeSpec with curvature eps0/(1+s^2).
    """
    E1 = cached_ground_mode(mesh).E1
    lows, thr, cond = [], [], []
    s_cert = None
    a = None
    for e in eps0_list:
        spec = make_spec(float(e))
        a = spec.a
        lo, hi = spec.window
        s = uniform_grid(lo, hi, ds) if s_nodes is None else np.asarray(s_nodes, float)
        s_cert = s
        disc = TubeDiscretization(s, mesh, "dirichlet")
        rep = lowest_eigenpairs(assemble_full_tube(spec, disc).shifted(E1), 1, tol)
        lam = float(rep.eigenvalues[0]) + E1
        lows.append(lam)
        thr.append(bool(lam >= E1 - 10 * tol))
        kap = np.abs(spec.curve.kappa_at(s))
        cond.append(bool(np.all(sufficient_condition(s, kap, a, E1, c_star, s0) >= 0)))
    cert = certified_eps0(s_cert, a, E1, c_star, s0) if s_cert is not None else 0.0
    return MildBendingResult([float(e) for e in eps0_list], lows, thr, cond, float(cert), E1,
                             float(c_star), {"h_mesh": mesh.h_mesh})
