"""Tensor-product discretizations of the tube forms.

P1 elements in s (two-point Gauss) times the cross-section elements in t.
Matrices are block tridiagonal in s; every block shares the sparsity
pattern of the cross-section interior-node matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .cross_section import fem
from .cross_section.mesh import Mesh2D
from .errors import DegenerateJacobian, DimensionMismatch, NegativeWeight
from .geometry import TubeSpec
from .profiles import Profile

log = logging.getLogger(__name__)

_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


# ---------------------------------------------------------------------------
# grids


def uniform_grid(lo: float, hi: float, ds: float) -> np.ndarray:
    n = max(int(np.ceil((hi - lo) / ds - 1e-9)), 1)
    return np.linspace(lo, hi, n + 1)


def composite_grid(breaks, spacings) -> np.ndarray:
    """Piecewise-uniform grid: spacing ``spacings[i]`` on [breaks[i], breaks[i+1]]."""
    breaks = np.asarray(breaks, dtype=float)
    if len(spacings) != len(breaks) - 1:
        raise DimensionMismatch("need one spacing per sub-interval")
    parts = [uniform_grid(a, b, d)[:-1] for a, b, d in zip(breaks[:-1], breaks[1:], spacings)]
    return np.concatenate(parts + [breaks[-1:]])


def graded_grid(lo: float, hi: float, core: tuple, ds_core: float, ds_far: float,
                ratio: float = 1.15) -> np.ndarray:
    """Fine spacing on ``core`` growing geometrically by ``ratio`` up to ``ds_far``."""
    c0, c1 = max(core[0], lo), min(core[1], hi)
    mid = uniform_grid(c0, c1, ds_core)

    def side(start, end, direction):
        pts, x, d = [], start, ds_core
        while (end - x) * direction > 0:
            d = min(d * ratio, ds_far)
            x = x + direction * d
            if (end - x) * direction < 0.5 * d:
                x = end
            pts.append(x)
        return pts

    right = side(c1, hi, +1)
    left = side(c0, lo, -1)[::-1]
    return np.concatenate([left, mid, right])


# ---------------------------------------------------------------------------
# discretization


@dataclass(frozen=True, eq=False)
class TubeDiscretization:
    """Grid in s, cross-section mesh and end condition.

    Unknown ``p * n_t + i`` belongs to the p-th active s-node and the i-th
    interior mesh node. Dirichlet ends remove the first and last s-node.
    """

    s_nodes: np.ndarray
    mesh: Mesh2D
    end_condition: str = "dirichlet"

    def __post_init__(self):
        s = np.asarray(self.s_nodes, dtype=float)
        if s.ndim != 1 or len(s) < 2 or np.any(np.diff(s) <= 0):
            raise DimensionMismatch("s_nodes must be strictly increasing with length >= 2")
        if self.end_condition not in ("dirichlet", "natural"):
            raise ValueError("end_condition must be 'dirichlet' or 'natural'")
        if self.end_condition == "dirichlet" and len(s) < 3:
            raise DimensionMismatch("dirichlet ends need at least one interior s-node")
        s.setflags(write=False)
        object.__setattr__(self, "s_nodes", s)

    @property
    def n_t(self) -> int:
        return len(self.mesh.interior)

    @property
    def active(self) -> slice:
        n = len(self.s_nodes)
        return slice(1, n - 1) if self.end_condition == "dirichlet" else slice(0, n)

    @property
    def active_nodes(self) -> np.ndarray:
        return self.s_nodes[self.active]

    @property
    def n_s(self) -> int:
        return len(self.active_nodes)

    @property
    def size(self) -> int:
        return self.n_s * self.n_t

    def index(self, p: int, i: int) -> int:
        return p * self.n_t + i

    @property
    def interval(self):
        return float(self.s_nodes[0]), float(self.s_nodes[-1])

    def max_ds(self) -> float:
        return float(np.max(np.diff(self.s_nodes)))

    def restrict(self, lo: float, hi: float, end_condition: Optional[str] = None):
        """Sub-discretization on the grid nodes inside [lo, hi]."""
        s = self.s_nodes
        i0 = int(np.argmin(np.abs(s - lo)))
        i1 = int(np.argmin(np.abs(s - hi)))
        tol = 1e-9 * max(1.0, np.max(np.abs(s)))
        if abs(s[i0] - lo) > tol or abs(s[i1] - hi) > tol:
            raise DimensionMismatch(f"interval ({lo}, {hi}) endpoints are not grid nodes")
        return TubeDiscretization(s[i0:i1 + 1].copy(), self.mesh,
                                  end_condition or self.end_condition)

    def product(self, f_s: np.ndarray, g_t: np.ndarray) -> np.ndarray:
        """Vector of the product f(s) g(t) from active-node and interior-node values."""
        return np.kron(np.asarray(f_s, float), np.asarray(g_t, float))

    def coordinates(self) -> np.ndarray:
        """Unknown positions (s, t2, t3) in grid units, used for fill-reducing orderings."""
        ds = float(np.median(np.diff(self.s_nodes)))
        t = self.mesh.nodes[self.mesh.interior] / self.mesh.h_mesh
        return np.column_stack([np.repeat(self.active_nodes / ds, self.n_t),
                                np.tile(t, (self.n_s, 1))])

    def describe(self) -> dict:
        return {"s_min": self.interval[0], "s_max": self.interval[1],
                "n_s_nodes": int(len(self.s_nodes)), "max_ds": self.max_ds(),
                "end_condition": self.end_condition, "h_mesh": self.mesh.h_mesh,
                "n_t": self.n_t, "size": self.size}


@dataclass(frozen=True, eq=False)
class AssembledForm:
    """Stiffness-type matrix A, mass-type matrix B and a label."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    description: str
    disc: Optional[TubeDiscretization] = field(default=None, repr=False)
    lower_bound: Optional[float] = None  # known lower bound of the pencil, if any

    def shifted(self, e1: float) -> "AssembledForm":
        lb = None if self.lower_bound is None else self.lower_bound - e1
        return AssembledForm((self.A - e1 * self.B).tocsr(), self.B,
                             f"{self.description} shifted by {e1!r}", self.disc, lb)

    def coordinates(self) -> Optional[np.ndarray]:
        return None if self.disc is None else self.disc.coordinates()

    def symmetry_error(self) -> float:
        err = 0.0
        for M in (self.A, self.B):
            d = abs(M - M.T).max()
            err = max(err, float(d) / max(float(abs(M).max()), 1e-300))
        return err

    def check(self) -> None:
        """Symmetry to 1e-14 relative and positive definite B."""
        from .linalg import inertia
        from .errors import FactorizationFailure
        if self.symmetry_error() > 1e-14:
            raise FactorizationFailure(f"form not symmetric ({self.symmetry_error():.2e})")
        neg, pos = inertia(self.B)
        if neg or pos != self.B.shape[0]:
            raise FactorizationFailure("mass matrix is not positive definite")

    def value(self, psi) -> float:
        psi = np.asarray(psi, float)
        return float(psi @ (self.A @ psi))

    def norm2(self, psi) -> float:
        psi = np.asarray(psi, float)
        return float(psi @ (self.B @ psi))


# ---------------------------------------------------------------------------
# 1D pieces


def _as_function(f, s_nodes):
    """Callable from a callable, a Profile, a constant, or samples on s_nodes."""
    if f is None:
        return lambda s: np.zeros_like(np.asarray(s, float))
    if callable(f):
        return f
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return lambda s: np.full_like(np.asarray(s, float), float(arr))
    if arr.shape != np.shape(s_nodes):
        raise DimensionMismatch(f"samples of length {arr.shape} do not match {len(s_nodes)} s-nodes")
    return lambda s: np.interp(s, s_nodes, arr)


def gauss_points(s_nodes: np.ndarray):
    """Two-point Gauss nodes and weights per element, shape (n_elem, 2)."""
    h = np.diff(s_nodes)
    pts = s_nodes[:-1, None] + h[:, None] * _GAUSS[None, :]
    wts = np.repeat(0.5 * h[:, None], 2, axis=1)
    return pts, wts


def one_d_matrices(s_nodes: np.ndarray, weight_values: Optional[np.ndarray] = None):
    """Element-local 1D integrals for P1 with weights at the Gauss points.

    Returns (K, M, D), each of shape (n_elem, 2, 2), for the integrals of
    w phi_a' phi_b', w phi_a phi_b and w phi_a' phi_b.
    """
    h = np.diff(s_nodes)
    pts, wts = gauss_points(s_nodes)
    w = wts if weight_values is None else wts * weight_values
    phi = np.stack([1 - _GAUSS, _GAUSS], axis=1)  # (g, a)
    dphi = np.stack([-1.0 / h, 1.0 / h], axis=1)  # (e, a)
    K = np.einsum("eg,ea,eb->eab", w, dphi, dphi)
    M = np.einsum("eg,ga,gb->eab", w, phi, phi)
    D = np.einsum("eg,ea,gb->eab", w, dphi, phi)
    return K, M, D


def _global_1d(local: np.ndarray, n: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    e = np.arange(len(local))
    for a in range(2):
        for b in range(2):
            rows.append(e + a)
            cols.append(e + b)
            vals.append(local[:, a, b])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _restrict_1d(M: sp.csr_matrix, disc: TubeDiscretization) -> sp.csr_matrix:
    a = disc.active
    return M[a, :][:, a].tocsr()


# ---------------------------------------------------------------------------
# straight twisted tube


def assemble_straight_twisted(alpha, disc: TubeDiscretization,
                              description: Optional[str] = None) -> AssembledForm:
    """Form ||d_s psi - alpha d_u psi||^2 + ||grad_t psi||^2 and the L2 inner product.

    ``alpha`` may be a callable of s, a Profile, a constant, or samples on
    the s-nodes (interpolated linearly).
    """
    s = disc.s_nodes
    f = _as_function(alpha, s)
    pts, _ = gauss_points(s)
    av = np.asarray(f(pts), dtype=float) * np.ones_like(pts)
    n = len(s)
    K1e, M1e, _ = one_d_matrices(s)
    _, Ma2e, _ = one_d_matrices(s, av ** 2)
    _, _, Dae = one_d_matrices(s, av)
    K1, M1, Ma2, Da = (_restrict_1d(_global_1d(x, n), disc) for x in (K1e, M1e, Ma2e, Dae))
    F = fem.forms(disc.mesh)
    cross = sp.kron(Da, F.C, format="csr")
    A = (sp.kron(K1, F.M) + sp.kron(M1, F.K) + sp.kron(Ma2, F.Ku) - cross - cross.T).tocsr()
    B = sp.kron(M1, F.M, format="csr")
    desc = description or "straight twisted form ||d_s psi - alpha d_u psi||^2 + ||grad' psi||^2"
    return AssembledForm(A, B, desc, disc, 0.0)


# ---------------------------------------------------------------------------
# full curved tube


class _BlockAssembler:
    """Accumulates block-tridiagonal matrices with the cross-section pattern."""

    def __init__(self, disc: TubeDiscretization):
        self.disc = disc
        self.pat = fem.pattern(disc.mesh)
        nnz = len(self.pat.indices)
        n = len(disc.s_nodes)
        self.diag = np.zeros((n, nnz))
        self.upper = np.zeros((n - 1, nnz))
        # transpose permutation of the symmetric pattern
        rows = np.repeat(np.arange(self.pat.n), np.diff(self.pat.indptr))
        key_t = self.pat.indices * self.pat.n + rows
        key = rows * self.pat.n + self.pat.indices
        order = np.argsort(key)
        self.tpos = order[np.searchsorted(key[order], key_t)]
        self.rows = rows

    def add(self, e: int, a: int, b: int, data: np.ndarray):
        if a == b:
            self.diag[e + a] += data
        elif a == 0:
            self.upper[e] += data
        # block (1, 0) is the transpose of block (0, 1) by symmetry

    def matrix(self) -> sp.csr_matrix:
        disc = self.disc
        act = np.arange(len(disc.s_nodes))[disc.active]
        n_t = self.pat.n
        r_loc, c_loc = self.rows, self.pat.indices
        R, C, V = [], [], []
        for p, node in enumerate(act):
            R.append(p * n_t + r_loc)
            C.append(p * n_t + c_loc)
            V.append(self.diag[node])
            if p + 1 < len(act):
                up = self.upper[node]
                R.append(p * n_t + r_loc)
                C.append((p + 1) * n_t + c_loc)
                V.append(up)
                # lower block = transpose of the upper block
                R.append((p + 1) * n_t + c_loc)
                C.append(p * n_t + r_loc)
                V.append(up)
        N = len(act) * n_t
        return sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))),
                             shape=(N, N))


def _wmat(w, A, B):
    """sum_q w[m, q] A[m, q, i] B[m, q, j] as a batched matrix product."""
    return np.matmul(np.swapaxes(A * w[..., None], 1, 2), B)


def _slice_matrices(qd, coeffs, pat):
    """Cross-section matrices for one value of s, in pattern data order."""
    css, cs2, cs3, c22, c23, c33, mass = coeffs
    W = qd.weights
    N, G = qd.values, qd.grads
    G0, G1 = G[..., 0], G[..., 1]
    gk = cs2[..., None] * G0 + cs3[..., None] * G1  # (m, q, 3)
    SS = _wmat(W * css, N, N)
    SK = _wmat(W, N, gk)
    KL = (_wmat(W, G0, c22[..., None] * G0 + c23[..., None] * G1)
          + _wmat(W, G1, c23[..., None] * G0 + c33[..., None] * G1))
    MS = _wmat(W * mass, N, N)
    return tuple(pat.accumulate(x) for x in (SS, SK, KL, MS))


def metric_coefficients(kappa: float, theta: float, w: float, points: np.ndarray):
    """Entries of h G^{-1} and the weight h at cross-section points."""
    t2, t3 = points[..., 0], points[..., 1]
    h = 1.0 - (t2 * np.cos(theta) + t3 * np.sin(theta)) * kappa
    if np.any(h <= 0):
        raise DegenerateJacobian(f"h <= 0 (min {h.min():.3e}); a*sup|kappa| must stay below 1")
    h2, h3 = -t3 * w, t2 * w
    inv = 1.0 / h
    return (inv, -h2 * inv, -h3 * inv, h + h2 * h2 * inv, h2 * h3 * inv, h + h3 * h3 * inv, h)


def assemble_full_tube(spec: TubeSpec, disc: TubeDiscretization,
                       description: Optional[str] = None) -> AssembledForm:
    """Form of the Dirichlet Laplacian in the straightened coordinates (s, t).

    A integrates G^{ij} d_i psi d_j psi h and B integrates psi^2 h, with the
    metric evaluated pointwise at the quadrature nodes.
    """
    mesh = disc.mesh
    s = disc.s_nodes
    lo, hi = spec.curve.span
    if s[0] < lo - 1e-12 or s[-1] > hi + 1e-12:
        raise DimensionMismatch("s-grid extends beyond the curve data")
    qd = fem.quadrature(mesh)
    pat = fem.pattern(mesh)
    Aasm, Basm = _BlockAssembler(disc), _BlockAssembler(disc)
    Basm.tpos = Aasm.tpos
    pts, wts = gauss_points(s)
    kap = spec.curve.kappa_at(pts)
    th = spec.angle.theta_at(pts)
    w = spec.twist_rate(pts)
    h = np.diff(s)
    phi = np.stack([1 - _GAUSS, _GAUSS], axis=1)
    cache = {}
    for e in range(len(h)):
        dphi = np.array([-1.0 / h[e], 1.0 / h[e]])
        for g in range(2):
            k = float(kap[e, g])
            key = (k * np.cos(th[e, g]), k * np.sin(th[e, g]), float(w[e, g])) if k != 0 else \
                (0.0, 0.0, float(w[e, g]))
            if key not in cache:
                coeffs = metric_coefficients(k, float(th[e, g]), float(w[e, g]), qd.points)
                cache[key] = _slice_matrices(qd, coeffs, pat)
                if len(cache) > 4096:
                    cache.clear()
                    cache[key] = _slice_matrices(qd, coeffs, pat)
            SS, SK, KL, MS = cache[key]
            SKt = SK[Aasm.tpos]
            wg = wts[e, g]
            for a in range(2):
                for b in range(a, 2):
                    val = (dphi[a] * dphi[b] * SS + dphi[a] * phi[g, b] * SK
                           + phi[g, a] * dphi[b] * SKt + phi[g, a] * phi[g, b] * KL)
                    Aasm.add(e, a, b, wg * val)
                    Basm.add(e, a, b, wg * phi[g, a] * phi[g, b] * MS)
    desc = description or "full tube form (d_i psi, G^ij d_j psi) with weight h"
    return AssembledForm(Aasm.matrix(), Basm.matrix(), desc, disc, 0.0)


# ---------------------------------------------------------------------------
# weighted mass


@dataclass(frozen=True)
class Indicator(Profile):
    """Indicator function of the interval (lo, hi)."""

    lo: float = 0.0
    hi: float = 1.0

    def _eval(self, s):
        return ((s > self.lo) & (s < self.hi)).astype(float)

    @property
    def support(self):
        return (self.lo, self.hi)


def hardy_weight(s0: float, scale: float = 1.0):
    """w(s) = scale / (1 + (s - s0)^2)."""
    def w(s):
        return scale / (1.0 + (np.asarray(s, float) - s0) ** 2)
    return w


def _indicator_1d(s_nodes: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Exact element mass integrals of phi_a phi_b over (lo, hi)."""
    n_e = len(s_nodes) - 1
    out = np.zeros((n_e, 2, 2))
    for e in range(n_e):
        a, b = max(s_nodes[e], lo), min(s_nodes[e + 1], hi)
        if b <= a:
            continue
        he = s_nodes[e + 1] - s_nodes[e]
        x = (a + (b - a) * _GAUSS - s_nodes[e]) / he
        phi = np.stack([1 - x, x], axis=1)
        out[e] = 0.5 * (b - a) * np.einsum("ga,gb->ab", phi, phi)
    return out


def assemble_weighted_mass(disc: TubeDiscretization, w) -> sp.csr_matrix:
    """Matrix of the integral of w(s) |psi|^2 over the tube.

    Indicators of intervals are integrated exactly; other weights use the
    two-point Gauss rule in s.
    """
    s = disc.s_nodes
    if isinstance(w, Indicator):
        Me = _indicator_1d(s, w.lo, w.hi)
    else:
        f = _as_function(w, s)
        pts, _ = gauss_points(s)
        vals = np.asarray(f(pts), dtype=float) * np.ones_like(pts)
        if np.any(vals < 0):
            raise NegativeWeight(f"weight takes the negative value {vals.min():.3e}")
        _, Me, _ = one_d_matrices(s, vals)
    M1 = _restrict_1d(_global_1d(Me, len(s)), disc)
    return sp.kron(M1, fem.forms(disc.mesh).M, format="csr")


def export_coo(M, path) -> None:
    """Write ``row col value`` lines of a sparse matrix, one entry per line."""
    C = sp.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for i in order:
            fh.write(f"{C.row[i]} {C.col[i]} {float(C.data[i])!r}\n")
