"""Quadrature data and bilinear forms on a cross-section mesh.

All forms are restricted to interior nodes (homogeneous Dirichlet data).
Every element carries three basis functions evaluated at its quadrature
points together with their physical gradients, so Cartesian and polar
elements are assembled by the same code.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh2D

# Gauss-Legendre order used for polar elements (per direction)
POLAR_ORDER = 3


@dataclass(frozen=True)
class ElementQuadrature:
    """Per-element quadrature arrays.

    Attributes
    ----------
    points : (m, q, 2)  physical quadrature points
    weights : (m, q)    weights including the area element
    values : (m, q, 3)  basis function values
    grads : (m, q, 3, 2) physical basis gradients
    """

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    grads: np.ndarray


@dataclass(frozen=True)
class InteriorPattern:
    """Sparsity pattern of the interior-node matrices of a mesh.

    ``slot[e, i, j]`` is the position in the CSR data array of the entry
    coupling local vertices i and j of element e, or -1 if either vertex is on
    the boundary.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    slot: np.ndarray

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def accumulate(self, local: np.ndarray) -> np.ndarray:
        """Sum element contributions (m, 3, 3) into CSR data order."""
        s = self.slot.ravel()
        keep = s >= 0
        return np.bincount(s[keep], weights=local.reshape(-1)[keep], minlength=len(self.indices))


_quad_cache: "weakref.WeakKeyDictionary[Mesh2D, dict]" = weakref.WeakKeyDictionary()


def _cache(mesh: Mesh2D) -> dict:
    d = _quad_cache.get(mesh)
    if d is None:
        d = {}
        _quad_cache[mesh] = d
    return d


def quadrature(mesh: Mesh2D) -> ElementQuadrature:
    c = _cache(mesh)
    if "quad" not in c:
        c["quad"] = _polar_quadrature(mesh) if mesh.chart == "polar" else _cartesian_quadrature(mesh)
    return c["quad"]


def pattern(mesh: Mesh2D) -> InteriorPattern:
    c = _cache(mesh)
    if "pattern" not in c:
        c["pattern"] = _build_pattern(mesh)
    return c["pattern"]


def _cartesian_quadrature(mesh: Mesh2D) -> ElementQuadrature:
    p = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # gradients of barycentric coordinates
    g1 = np.stack([d2[:, 1], -d2[:, 0]], 1) / det[:, None]
    g2 = np.stack([-d1[:, 1], d1[:, 0]], 1) / det[:, None]
    g = np.stack([-g1 - g2, g1, g2], 1)  # (m, 3, 2)
    # mid-edge rule, exact for quadratics
    bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    pts = np.einsum("qi,mid->mqd", bary, p)
    m = len(p)
    w = np.repeat((0.5 * det / 3.0)[:, None], 3, axis=1)
    vals = np.broadcast_to(bary, (m, 3, 3)).copy()
    grads = np.broadcast_to(g[:, None], (m, 3, 3, 2)).copy()
    return ElementQuadrature(pts, w, vals, grads)


def _polar_quadrature(mesh: Mesh2D) -> ElementQuadrature:
    x, wx = np.polynomial.legendre.leggauss(POLAR_ORDER)
    x, wx = 0.5 * (x + 1), 0.5 * wx
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(wx, wx, indexing="ij")
    U, V, W = U.ravel(), V.ravel(), (WU * WV).ravel()
    # Duffy map of the unit square onto the reference triangle
    xi, eta, wtri = U * (1 - V), U * V, W * U

    cc = mesh.chart_coords
    m, q = len(cc), len(W)
    c = np.asarray(mesh.center)
    pts = np.empty((m, q, 2))
    wts = np.empty((m, q))
    vals = np.empty((m, q, 3))
    grads = np.empty((m, q, 3, 2))

    reg = ~mesh.collapsed
    if np.any(reg):
        P = cc[reg]
        d1, d2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        g1 = np.stack([d2[:, 1], -d2[:, 0]], 1) / det[:, None]
        g2 = np.stack([-d1[:, 1], d1[:, 0]], 1) / det[:, None]
        gc = np.stack([-g1 - g2, g1, g2], 1)  # chart gradients (d/dr, d/dphi)
        r = P[:, 0, 0][:, None] + d1[:, 0][:, None] * xi + d2[:, 0][:, None] * eta
        ph = P[:, 0, 1][:, None] + d1[:, 1][:, None] * xi + d2[:, 1][:, None] * eta
        bv = np.stack([1 - xi - eta, xi, eta], 1)
        vals[reg] = bv[None]
        wts[reg] = np.abs(det)[:, None] * wtri[None] * r
        pts[reg], grads[reg] = _polar_to_physical(c, r, ph, np.broadcast_to(gc[:, None], (len(P), q, 3, 2)))

    col = mesh.collapsed
    if np.any(col):
        P = cc[col]
        r1 = P[:, 1, 0]
        pa = P[:, 1, 1]
        dph = P[:, 2, 1] - P[:, 1, 1]
        rho, et = U, V  # tensor rule on (rho, eta) in [0, 1]^2
        r = r1[:, None] * rho
        ph = pa[:, None] + dph[:, None] * et
        bv = np.stack([1 - rho, rho * (1 - et), rho * et], 1)  # (q, 3)
        vals[col] = bv[None]
        wts[col] = (r1 * dph)[:, None] * W[None] * r
        # d/dr and (1/r) d/dphi, written without dividing by rho
        dr = np.stack([-np.ones(q), 1 - et, et], 1)[None] / r1[:, None, None]
        dphi_over_r = np.stack([np.zeros(q), -np.ones(q), np.ones(q)], 1)[None] / (r1 * dph)[:, None, None]
        e_r = np.stack([np.cos(ph), np.sin(ph)], -1)
        e_p = np.stack([-np.sin(ph), np.cos(ph)], -1)
        grads[col] = dr[..., None] * e_r[:, :, None, :] + dphi_over_r[..., None] * e_p[:, :, None, :]
        pts[col] = c + r[..., None] * e_r
    return ElementQuadrature(pts, wts, vals, grads)


def _polar_to_physical(c, r, ph, gc):
    e_r = np.stack([np.cos(ph), np.sin(ph)], -1)
    e_p = np.stack([-np.sin(ph), np.cos(ph)], -1)
    pts = c + r[..., None] * e_r
    grads = gc[..., 0:1] * e_r[:, :, None, :] + (gc[..., 1:2] / r[..., None, None]) * e_p[:, :, None, :]
    return pts, grads


def _build_pattern(mesh: Mesh2D) -> InteriorPattern:
    interior = mesh.interior
    gmap = -np.ones(mesh.n_nodes, np.int64)
    gmap[interior] = np.arange(len(interior))
    loc = gmap[mesh.triangles]  # (m, 3)
    rows = np.repeat(loc[:, :, None], 3, axis=2)
    cols = np.repeat(loc[:, None, :], 3, axis=1)
    valid = (rows >= 0) & (cols >= 0)
    n = len(interior)
    key = rows * n + cols
    ukeys, inv = np.unique(key[valid], return_inverse=True)
    slot = -np.ones(key.shape, np.int64)
    slot[valid] = inv
    r, cidx = np.divmod(ukeys, n)
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, r + 1, 1)
    indptr = np.cumsum(indptr)
    return InteriorPattern(n, indptr, cidx.astype(np.int64), slot)


# ---------------------------------------------------------------------------
# element kernels


def angular_field(points: np.ndarray) -> np.ndarray:
    """u(t) = (t3, -t2); the angular derivative is d_u = u . grad."""
    return np.stack([points[..., 1], -points[..., 0]], -1)


def local_mass(qd: ElementQuadrature, weight=None) -> np.ndarray:
    w = qd.weights if weight is None else qd.weights * weight
    return np.einsum("mq,mqi,mqj->mij", w, qd.values, qd.values)


def local_stiffness(qd: ElementQuadrature, weight=None) -> np.ndarray:
    w = qd.weights if weight is None else qd.weights * weight
    return np.einsum("mq,mqid,mqjd->mij", w, qd.grads, qd.grads)


def local_angular(qd: ElementQuadrature):
    """Element matrices of (d_u f, d_u g) and (f, d_u g)."""
    u = angular_field(qd.points)
    du = np.einsum("mqd,mqid->mqi", u, qd.grads)
    ku = np.einsum("mq,mqi,mqj->mij", qd.weights, du, du)
    c = np.einsum("mq,mqi,mqj->mij", qd.weights, qd.values, du)
    return ku, c


@dataclass(frozen=True)
class CrossSectionForms:
    """Interior-node matrices of a mesh.

    M : mass, K : stiffness, Ku : (d_u f, d_u g), C : (f, d_u g).
    """

    M: sp.csr_matrix
    K: sp.csr_matrix
    Ku: sp.csr_matrix
    C: sp.csr_matrix


def forms(mesh: Mesh2D) -> CrossSectionForms:
    cache = _cache(mesh)
    if "forms" not in cache:
        qd = quadrature(mesh)
        pat = pattern(mesh)
        ku, c = local_angular(qd)
        mats = [pat.matrix(pat.accumulate(x)) for x in
                (local_mass(qd), local_stiffness(qd), ku, c)]
        # symmetrize the forms that are symmetric by construction
        M, K, Ku = (0.5 * (A + A.T) for A in mats[:3])
        cache["forms"] = CrossSectionForms(M.tocsr(), K.tocsr(), Ku.tocsr(), mats[3])
    return cache["forms"]


def interpolate(mesh: Mesh2D, f) -> np.ndarray:
    """Nodal values of a callable f(t2, t3) at all mesh nodes."""
    return np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)


def extend(mesh: Mesh2D, interior_values: np.ndarray) -> np.ndarray:
    """Embed interior values into a full nodal vector with zero boundary."""
    full = np.zeros(mesh.n_nodes)
    full[mesh.interior] = interior_values
    return full
