"""Thin-tube effective operator -d^2/ds^2 - kappa^2/4 + C(omega) (tau - theta')^2."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import CSV_MARKER
from . import linalg
from .assembly import (TubeDiscretization, _global_1d, assemble_full_tube, gauss_points,
                       one_d_matrices, uniform_grid)
from .cross_section.mesh import Mesh2D
from .cross_section.modes import cached_ground_mode, extract_c_omega
from .errors import HypothesisViolated
from .geometry import TubeSpec
from .spectral import lowest_eigenpairs

log = logging.getLogger(__name__)

CONDITIONING_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class EffectiveOperator1D:
    """P1 discretization of -d^2/ds^2 + V on a bounded interval, Dirichlet ends.

    ``potential`` is a callable evaluated at the Gauss points of the grid.
    """

    s_nodes: np.ndarray
    potential: Callable
    c_omega: float = 0.0
    description: str = ""

    def __post_init__(self):
        s = np.asarray(self.s_nodes, dtype=float)
        if s.ndim != 1 or len(s) < 3 or np.any(np.diff(s) <= 0):
            raise ValueError("need a strictly increasing grid with at least 3 nodes")
        object.__setattr__(self, "s_nodes", s)
        pts, _ = gauss_points(s)
        v = np.asarray(self.potential(pts), dtype=float) * np.ones_like(pts)
        if not np.all(np.isfinite(v)):
            raise ValueError("potential must be bounded")
        self._check_resolution()

    def _check_resolution(self):
        """At least 16 nodes per variation length max|V| / max|V'| of the potential."""
        s = self.s_nodes
        fine = np.linspace(s[0], s[-1], 8 * len(s))
        v = np.asarray(self.potential(fine), float) * np.ones_like(fine)
        dv = np.abs(np.diff(v)) / np.diff(fine)
        vmax = float(np.max(np.abs(v)))
        if vmax == 0 or dv.max() == 0:
            return
        scale = vmax / float(dv.max())
        if np.max(np.diff(s)) > scale / 16:
            raise ValueError(f"grid spacing {np.max(np.diff(s)):.3g} does not resolve the "
                             f"potential (variation length {scale:.3g})")

    def matrices(self):
        s = self.s_nodes
        pts, _ = gauss_points(s)
        v = np.asarray(self.potential(pts), float) * np.ones_like(pts)
        Ke, Me, _ = one_d_matrices(s)
        _, Mve, _ = one_d_matrices(s, v)
        n = len(s)
        K, M, Mv = (_global_1d(x, n)[1:-1, 1:-1] for x in (Ke, Me, Mve))
        return (K + Mv).tocsr(), M.tocsr()

    def potential_values(self, s=None):
        s = self.s_nodes if s is None else np.asarray(s, float)
        return np.asarray(self.potential(s), float) * np.ones_like(s)


def effective_operator(spec: TubeSpec, s_nodes, c_omega: float) -> EffectiveOperator1D:
    """Effective operator of a tube: V = -kappa^2/4 + c_omega (tau - theta')^2."""
    def V(s):
        return -0.25 * spec.curve.kappa_at(s) ** 2 + c_omega * spec.twist_rate(s) ** 2
    return EffectiveOperator1D(np.asarray(s_nodes, float), V, float(c_omega),
                               "-d^2/ds^2 - kappa^2/4 + C(omega) (tau - theta')^2")


def effective_eigenvalues(op: EffectiveOperator1D, k: int = 1) -> np.ndarray:
    A, M = op.matrices()
    return linalg.lowest(A, M, k).values


@dataclass
class ThinLimitRow:
    eps: float
    j: int
    lam: float
    e1_scaled: float
    mu: float
    d: float


@dataclass
class ThinLimitTable:
    rows: list
    c_omega: float
    E1: float
    meta: dict = field(default_factory=dict)

    def d(self, j: int = 1) -> np.ndarray:
        return np.array([r.d for r in self.rows if r.j == j])

    def to_rows(self):
        return [(r.eps, r.j, r.lam, r.e1_scaled, r.mu, r.d) for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            fh.write(CSV_MARKER + "\n")
            w.writerow(["eps", "j", "lambda_j", "E1_over_eps2", "mu_j", "d_j"])
            for row in self.to_rows():
                w.writerow([repr(float(x)) if i != 1 else int(x) for i, x in enumerate(row)])


def thin_limit_study(spec: TubeSpec, eps_list: Sequence[float], j_max: int, mesh: Mesh2D,
                     ds: float = 0.05, c_omega: Optional[float] = None,
                     s_nodes: Optional[np.ndarray] = None) -> ThinLimitTable:
    """Compare lambda_j(eps) of the tube with cross-section eps*omega to E1/eps^2 + mu_j.

    ``mesh`` meshes the unscaled cross-section; each eps uses the mapped
    mesh, so the discrete E1(eps omega) equals E1(omega)/eps^2 exactly.
    Dirichlet ends at the ends of the spec window. ``c_omega`` defaults to
    the value extracted from ``mesh``; passing 0 gives the negative control.
    """
    lo, hi = spec.window
    s = uniform_grid(lo, hi, ds) if s_nodes is None else np.asarray(s_nodes, float)
    E1 = cached_ground_mode(mesh).E1
    if c_omega is None:
        c_omega = extract_c_omega(mesh)
    op = effective_operator(spec, s, c_omega)
    mu = effective_eigenvalues(op, j_max)
    ksup = spec.curve.kappa_sup()
    rows = []
    for eps in eps_list:
        eps = float(eps)
        if spec.a * eps * ksup >= 1:
            raise HypothesisViolated(f"a*eps*sup|kappa| = {spec.a * eps * ksup:.3g} >= 1",
                                     "a*eps*kappa_sup", spec.a * eps * ksup)
        e1s = E1 / eps ** 2
        if e1s / max(abs(mu[0]), 1e-300) > CONDITIONING_LIMIT:
            warnings.warn(f"E1/eps^2 = {e1s:.3e} dominates mu_1 beyond {CONDITIONING_LIMIT:g}; "
                          "d_j may be lost to round-off", RuntimeWarning)
        m_eps = mesh.scaled(eps)
        disc = TubeDiscretization(s, m_eps, "dirichlet")
        form = assemble_full_tube(spec.scaled(eps), disc)
        # shift by E1/eps^2 before solving to keep the small differences accurate
        rep = lowest_eigenpairs(form.shifted(e1s), j_max)
        for j in range(j_max):
            lam = float(rep.eigenvalues[j]) + e1s
            d = float(rep.eigenvalues[j]) - float(mu[j])
            rows.append(ThinLimitRow(eps, j + 1, lam, e1s, float(mu[j]), d))
        log.info("eps=%g d_1=%.4e", eps, rows[-j_max].d)
    return ThinLimitTable(rows, float(c_omega), float(E1),
                          {"s_nodes": int(len(s)), "ds": float(np.max(np.diff(s))),
                           "h_mesh": mesh.h_mesh})
