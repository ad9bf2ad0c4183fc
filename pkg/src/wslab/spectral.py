"""Lowest eigenpairs of assembled forms, twisted thresholds and Rayleigh quotients."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .assembly import (AssembledForm, TubeDiscretization, assemble_straight_twisted,
                       uniform_grid)
from .cross_section.mesh import Mesh2D
from .cross_section.modes import cached_ground_mode
from .errors import ZeroVector

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9


@dataclass
class SpectrumReport:
    """Sorted eigenvalues with residual norms and discretization metadata."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    iterations: int
    mesh: dict
    grid: dict
    end_condition: Optional[str]
    paper_form: str
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"eigenvalues": [float(x) for x in self.eigenvalues],
                "residuals": [float(x) for x in self.residuals],
                "iterations": int(self.iterations),
                "mesh": self.mesh, "grid": self.grid,
                "end_condition": self.end_condition, "paper_form": self.paper_form}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _mesh_meta(mesh: Optional[Mesh2D]) -> dict:
    if mesh is None:
        return {}
    return {"h_mesh": mesh.h_mesh, "n_nodes": int(mesh.n_nodes),
            "n_triangles": int(len(mesh.triangles)), "chart": mesh.chart,
            "shape": None if mesh.shape is None else mesh.shape.to_dict()}


def lowest_eigenpairs(form: AssembledForm, k: int = 1, tol: float = DEFAULT_TOL) -> SpectrumReport:
    """k smallest eigenpairs of (A, B) by deterministic shift-invert Lanczos."""
    pairs = linalg.lowest(form.A, form.B, k, tol=tol, lower_bound=form.lower_bound,
                          coords=form.coordinates())
    disc = form.disc
    grid = {} if disc is None else {k_: v for k_, v in disc.describe().items()
                                    if k_ not in ("h_mesh",)}
    return SpectrumReport(pairs.values, pairs.residuals, pairs.iterations,
                          _mesh_meta(None if disc is None else disc.mesh), grid,
                          None if disc is None else disc.end_condition,
                          form.description, pairs.vectors)


def rayleigh_quotient(form: AssembledForm, psi) -> float:
    psi = np.asarray(psi, dtype=float)
    den = float(psi @ (form.B @ psi))
    if not np.any(psi) or den <= 0:
        raise ZeroVector("Rayleigh quotient of the zero vector")
    return float(psi @ (form.A @ psi)) / den


@dataclass
class ThresholdResult:
    value: float
    E1: float
    report: SpectrumReport
    vector: np.ndarray = field(repr=False)
    form: AssembledForm = field(repr=False)


def lambda_alpha_I(alpha, interval, mesh: Mesh2D, ds: float = 0.05,
                   s_nodes: Optional[np.ndarray] = None, end_condition: str = "natural",
                   tol: float = DEFAULT_TOL, details: bool = False):
    """Bottom of the spectrum of the twisted straight form on I x omega minus E1.

    Natural conditions at the interval ends; the shift is the discrete E1 of
    ``mesh`` so that alpha = 0 gives zero up to round-off.
    """
    lo, hi = float(interval[0]), float(interval[1])
    s = uniform_grid(lo, hi, ds) if s_nodes is None else np.asarray(s_nodes, float)
    disc = TubeDiscretization(s, mesh, end_condition)
    E1 = cached_ground_mode(mesh).E1
    form = assemble_straight_twisted(alpha, disc).shifted(E1)
    form = AssembledForm(form.A, form.B, "twisted straight form minus E1 on I x omega", disc,
                         form.lower_bound)
    rep = lowest_eigenpairs(form, 1, tol)
    val = float(rep.eigenvalues[0])
    if details:
        return ThresholdResult(val, E1, rep, rep.vectors[:, 0], form)
    return val


# ---------------------------------------------------------------------------
# Weyl-type probes


def cutoff(x):
    """Smooth cutoff equal to 1 on |x| <= 1/2 and 0 for |x| >= 1."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    out[x <= 0.5] = 1.0
    mid = (x > 0.5) & (x < 1.0)
    y = 2.0 * (x[mid] - 0.5)  # 0 -> 1 across the transition
    a = np.exp(-1.0 / np.maximum(1e-300, 1 - y))
    b = np.exp(-1.0 / np.maximum(1e-300, y))
    out[mid] = a / (a + b)
    return out


def weyl_probe(disc: TubeDiscretization, n: float, k: float) -> np.ndarray:
    """Vector of phi(s/n - n) cos(k s) J1(t) on the active grid nodes."""
    s = disc.active_nodes
    J = cached_ground_mode(disc.mesh).interior
    f = cutoff(s / n - n) * np.cos(k * s)
    return disc.product(f, J)
