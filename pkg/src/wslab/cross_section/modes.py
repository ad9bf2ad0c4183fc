"""Dirichlet ground mode, angular derivative and the twisted cross-section operator."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .. import CSV_MARKER
from .. import linalg
from ..errors import ExtrapolationUnstable, SolverNoConvergence
from . import fem
from .mesh import Mesh2D
from .shapes import is_rotationally_invariant

log = logging.getLogger(__name__)

RICHARDSON_ALPHAS = (1e-1, 5e-2, 2.5e-2)


@dataclass(frozen=True)
class GroundMode:
    """First Dirichlet eigenpair of a cross-section mesh.

    ``J1`` holds nodal values on all mesh nodes (zero on the boundary) and is
    normalized to unit L2 norm with a positive value at the interior node
    nearest the centroid.
    """

    E1: float
    J1: np.ndarray
    residual: float
    mesh: Mesh2D

    @property
    def interior(self) -> np.ndarray:
        return self.J1[self.mesh.interior]


def _anchor_node(mesh: Mesh2D) -> int:
    """Interior node nearest the area centroid of the mesh."""
    area = mesh.signed_areas()
    cen = (mesh.nodes[mesh.triangles].mean(axis=1) * area[:, None]).sum(0) / area.sum()
    interior = mesh.interior
    d = np.linalg.norm(mesh.nodes[interior] - cen, axis=1)
    return int(np.argmin(d))  # position inside the interior list


def solve_ground_mode(mesh: Mesh2D, tol: float = 1e-10) -> GroundMode:
    F = fem.forms(mesh)
    pairs = linalg.lowest(F.K, F.M, 1, tol=tol)
    E1 = float(pairs.values[0])
    v = pairs.vectors[:, 0]
    v = v / np.sqrt(v @ (F.M @ v))
    if v[_anchor_node(mesh)] < 0:
        v = -v
    res = float(np.linalg.norm(F.K @ v - E1 * (F.M @ v)) / np.linalg.norm(F.M @ v))
    if not E1 > 0 or res > 1e-8:
        raise SolverNoConvergence(f"ground mode residual {res:.3e} (E1={E1})")
    return GroundMode(E1, fem.extend(mesh, v), res, mesh)


def cached_ground_mode(mesh: Mesh2D) -> GroundMode:
    """Ground mode stored alongside the mesh quadrature cache."""
    c = fem._cache(mesh)
    if "ground" not in c:
        c["ground"] = solve_ground_mode(mesh)
    return c["ground"]


def cross_section_modes(mesh: Mesh2D, k: int):
    """The k lowest Dirichlet eigenpairs as (values, interior vectors)."""
    F = fem.forms(mesh)
    pairs = linalg.lowest(F.K, F.M, k)
    return pairs.values, pairs.vectors


# ---------------------------------------------------------------------------
# angular derivative d_u = t3 d_2 - t2 d_3


def _nodal_gradient(mesh: Mesh2D, field: np.ndarray) -> np.ndarray:
    """Element-averaged gradients distributed to nodes with area weights."""
    qd = fem.quadrature(mesh)
    f = np.asarray(field, dtype=float)[mesh.triangles]  # (m, 3)
    g = np.einsum("mi,mqid->mqd", f, qd.grads)
    area = qd.weights.sum(axis=1)
    gbar = np.einsum("mq,mqd->md", qd.weights, g)  # area times mean gradient
    num = np.zeros((mesh.n_nodes, 2))
    den = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(num, mesh.triangles[:, k], gbar)
        np.add.at(den, mesh.triangles[:, k], area)
    return num / den[:, None]


def angular_derivative(mesh: Mesh2D, field) -> np.ndarray:
    """Nodal values of d_u f for a nodal field f (diagnostic strong form)."""
    if callable(field):
        field = fem.interpolate(mesh, field)
    g = _nodal_gradient(mesh, field)
    t = mesh.nodes
    return t[:, 1] * g[:, 0] - t[:, 0] * g[:, 1]


def angular_bilinear(mesh: Mesh2D, f, g) -> float:
    """Weak form (d_u f, d_u g) on the finite-element space, exact for P1 fields."""
    qd = fem.quadrature(mesh)
    u = fem.angular_field(qd.points)
    vals = []
    for x in (f, g):
        x = fem.interpolate(mesh, x) if callable(x) else np.asarray(x, dtype=float)
        grad = np.einsum("mi,mqid->mqd", x[mesh.triangles], qd.grads)
        vals.append(np.einsum("mqd,mqd->mq", u, grad))
    return float(np.sum(qd.weights * vals[0] * vals[1]))


def angular_norm(mesh: Mesh2D, field) -> float:
    return float(np.sqrt(max(angular_bilinear(mesh, field, field), 0.0)))


# ---------------------------------------------------------------------------
# twisted cross-section operator


def b_alpha0_matrix(mesh: Mesh2D, alpha0: float, ground: GroundMode | None = None):
    ground = ground or cached_ground_mode(mesh)
    F = fem.forms(mesh)
    return F.K - ground.E1 * F.M + alpha0 ** 2 * F.Ku, F.M


def solve_b_alpha0(mesh: Mesh2D, alpha0: float, ground: GroundMode | None = None,
                   return_vector: bool = False):
    """Lowest eigenvalue of ||grad f||^2 - E1 ||f||^2 + alpha0^2 ||d_u f||^2.

    The shift uses the discrete E1 of the same mesh, so the value at
    alpha0 = 0 vanishes up to round-off.
    """
    A, M = b_alpha0_matrix(mesh, alpha0, ground)
    pairs = linalg.lowest(A, M, 1, tol=1e-10)
    lam = float(pairs.values[0])
    if return_vector:
        return lam, pairs.vectors[:, 0]
    return lam


@dataclass(frozen=True)
class COmegaEstimate:
    value: float
    ratios: tuple
    alphas: tuple
    first_order: float


def extract_c_omega(mesh: Mesh2D, alphas=RICHARDSON_ALPHAS, details: bool = False):
    """Small-twist coefficient lim lambda(alpha0) / alpha0^2.

    Returns exactly 0 for rotationally invariant shapes. Otherwise the
    ratios lambda(alpha0) / alpha0^2 at geometrically halved alpha0 are
    Richardson-extrapolated in alpha0^2.
    """
    shape = mesh.shape
    ground = cached_ground_mode(mesh)
    F = fem.forms(mesh)
    J = ground.interior
    first = float(J @ (F.Ku @ J))
    if shape is not None and is_rotationally_invariant(shape):
        est = COmegaEstimate(0.0, (), tuple(alphas), first)
        return est if details else 0.0
    alphas = tuple(float(a) for a in alphas)
    ratios = [solve_b_alpha0(mesh, a, ground) / a ** 2 for a in alphas]
    d = np.diff(ratios)
    if not (np.all(d >= 0) or np.all(d <= 0)):
        raise ExtrapolationUnstable(f"non-monotone ratios {ratios}")
    value = richardson(alphas, ratios)
    est = COmegaEstimate(float(value), tuple(ratios), alphas, first)
    return est if details else est.value


def richardson(alphas, values) -> float:
    """Extrapolate values(alpha) = c + d alpha^2 + e alpha^4 + ... to alpha = 0."""
    x = np.asarray(alphas, dtype=float) ** 2
    table = [np.asarray(values, dtype=float)]
    for level in range(1, len(x)):
        prev = table[-1]
        xa, xb = x[:-level], x[level:]
        table.append((xa * prev[1:] - xb * prev[:-1]) / (xa - xb))
    return float(table[-1][0])


def perturbation_coefficients(mesh: Mesh2D, n_modes: int = 30):
    """First and second order coefficients of lambda(alpha0) in alpha0^2.

    lambda(alpha0) = c1 alpha0^2 - c2 alpha0^4 + O(alpha0^6), with
    c1 = (d_u J1, d_u J1) and c2 = sum_k (d_u J_k, d_u J1)^2 / (E_k - E1)
    truncated to the first ``n_modes`` cross-section modes.
    """
    F = fem.forms(mesh)
    vals, vecs = cross_section_modes(mesh, n_modes)
    J = vecs[:, 0]
    KuJ = F.Ku @ J
    c1 = float(J @ KuJ)
    coup = vecs[:, 1:].T @ KuJ
    gaps = vals[1:] - vals[0]
    c2 = float(np.sum(coup ** 2 / gaps))
    return c1, c2


def export_mode_csv(mesh: Mesh2D, values: np.ndarray, path) -> None:
    """Write columns node, t2, t3, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        fh.write(CSV_MARKER + "\n")
        w.writerow(["node", "t2", "t3", "value"])
        for i, ((x, y), v) in enumerate(zip(mesh.nodes, values)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v))])
