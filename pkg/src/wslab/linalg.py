"""Sparse symmetric pencils: inertia counts and lowest eigenpairs.

The eigensolver is ARPACK shift-invert with a fixed starting vector and a
fixed shift strategy, so repeated runs on identical input give identical
output for a fixed BLAS thread count.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu
from scipy.sparse.linalg import norm as sla_norm

from .errors import FactorizationFailure, SolverNoConvergence

log = logging.getLogger(__name__)

DENSE_LIMIT = 400
CLUSTER_GAP = 1e-8
MAX_SHIFT_ROUNDS = 8


def _csc(A) -> sp.csc_matrix:
    return sp.csc_matrix(A) if sp.issparse(A) else sp.csc_matrix(np.asarray(A))


def nested_dissection(S, coords: np.ndarray, leaf: int = 64) -> np.ndarray:
    """Geometric nested-dissection ordering of the graph of S.

    Points are split at the median of their widest coordinate; the nodes of
    the lower half adjacent to the upper half form the separator, which is
    numbered after both halves. ``coords`` should be in grid units so that
    cuts follow the mesh resolution.
    """
    G = sp.csr_matrix(S)
    G = (abs(G) + abs(G).T).tocsr()
    n = G.shape[0]
    coords = np.asarray(coords, dtype=float)
    out = []
    # explicit stack of (index set, emitted flag) to avoid deep recursion
    stack = [("split", np.arange(n))]
    while stack:
        op, idx = stack.pop()
        if op == "emit":
            out.append(idx)
            continue
        if len(idx) <= leaf:
            out.append(idx)
            continue
        c = coords[idx]
        ax = int(np.argmax(c.max(0) - c.min(0)))
        x = c[:, ax]
        lower = x < np.median(x)
        if lower.all() or not lower.any():
            out.append(idx)
            continue
        upper_mask = np.zeros(n, bool)
        upper_mask[idx[~lower]] = True
        low_idx = idx[lower]
        sub = G[low_idx]
        rows = np.repeat(np.arange(len(low_idx)), np.diff(sub.indptr))
        touch = np.zeros(len(low_idx), bool)
        touch[rows[upper_mask[sub.indices]]] = True
        # processed in LIFO order: left half, then right half, then separator
        stack.append(("emit", low_idx[touch]))
        stack.append(("split", idx[~lower]))
        stack.append(("split", low_idx[~touch]))
    perm = np.concatenate(out)
    return perm


class Factor:
    """LU factorization of a symmetric matrix with symmetric pivoting.

    With ``coords`` the matrix is reordered by geometric nested dissection
    before factorization; otherwise SuperLU's minimum-degree ordering is used.
    """

    def __init__(self, S, coords: Optional[np.ndarray] = None):
        S = _csc(S)
        self.n = S.shape[0]
        if coords is not None and self.n > DENSE_LIMIT:
            self.perm = nested_dissection(S, coords)
            S = S[self.perm][:, self.perm].tocsc()
            spec = "NATURAL"
        else:
            self.perm = None
            spec = "MMD_AT_PLUS_A"
        try:
            self.lu = splu(S, permc_spec=spec, diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:  # exactly singular factor
            raise FactorizationFailure(str(exc)) from exc
        self.symmetric_pivots = bool(np.array_equal(self.lu.perm_r, self.lu.perm_c))

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.perm is None:
            return self.lu.solve(b)
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(b[self.perm])
        return x

    def negative_count(self) -> Optional[int]:
        """Number of negative eigenvalues, or None if pivoting spoiled the count."""
        if not self.symmetric_pivots:
            return None
        d = self.lu.U.diagonal()
        return int(np.sum(d < 0))


def factorize(S, coords: Optional[np.ndarray] = None) -> Factor:
    return Factor(S, coords)


def inertia(S, coords: Optional[np.ndarray] = None) -> tuple[int, int]:
    """Return (number of negative, number of positive) eigenvalues of symmetric S.

    Uses Sylvester's law on an LDL^T-type factorization: with symmetric
    pivoting the diagonal of U carries the signs of D. Falls back to a dense
    eigenvalue count for small matrices or if the factorization pivoted.
    """
    n = S.shape[0]
    if n <= DENSE_LIMIT:
        ev = np.linalg.eigvalsh(_dense(S))
        return int(np.sum(ev < 0)), int(np.sum(ev > 0))
    f = Factor(S, coords)
    neg = f.negative_count()
    if neg is None:
        if n > 4000:
            raise FactorizationFailure("factorization pivoted off the diagonal; inertia unavailable")
        d = np.linalg.eigvalsh(_dense(S))
        return int(np.sum(d < 0)), int(np.sum(d > 0))
    d = f.lu.U.diagonal()
    return neg, int(np.sum(d > 0))


def is_positive_semidefinite(S, B=None, tol: float = 0.0, coords=None) -> bool:
    """True iff S + tol*B has no negative eigenvalue (B defaults to identity)."""
    if tol:
        S = S + tol * (B if B is not None else sp.identity(S.shape[0]))
    return inertia(S, coords)[0] == 0


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def gershgorin_lower(A, B) -> float:
    """Lower bound for the smallest eigenvalue of the pencil (A, B), B > 0.

    Combines the Gershgorin disc bound of A with the Gershgorin bounds of B;
    the result is a valid lower bound that is cheap to evaluate.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    absA = abs(A)
    radA = np.asarray(absA.sum(axis=1)).ravel() - np.abs(A.diagonal())
    lowA = float(np.min(A.diagonal() - radA))
    absB = abs(B)
    radB = np.asarray(absB.sum(axis=1)).ravel() - np.abs(B.diagonal())
    hiB = float(np.max(B.diagonal() + radB))
    loB = float(np.min(B.diagonal() - radB))
    if lowA >= 0:
        # lambda >= lowA / lambda_max(B)
        return lowA / hiB if hiB > 0 else 0.0
    bound = lowA / loB if loB > 0 else lowA / _smallest_eig_estimate(B)
    return bound


def _smallest_eig_estimate(B) -> float:
    # crude but safe: smallest diagonal entry of B divided by a safety factor
    return float(np.min(B.diagonal())) / 8.0


@dataclass
class Eigenpairs:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    shift: float


def _residuals(A, B, vals, vecs) -> np.ndarray:
    R = A @ vecs - (B @ vecs) * vals
    return np.linalg.norm(R, axis=0) / np.linalg.norm(B @ vecs, axis=0)


def _normalize_order(vals, vecs, B):
    """B-normalize, fix signs and sort clusters deterministically."""
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, B @ vecs))
    vecs = vecs / norms
    idx = np.argmax(np.abs(vecs) > (1 - 1e-9) * np.max(np.abs(vecs), axis=0), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    # lexicographic ordering inside clusters of (numerically) equal eigenvalues
    start = 0
    n = len(vals)
    while start < n:
        stop = start + 1
        scale = max(1.0, abs(vals[start]))
        while stop < n and vals[stop] - vals[stop - 1] <= CLUSTER_GAP * scale:
            stop += 1
        if stop - start > 1:
            keys = np.round(vecs[:, start:stop], 10)
            perm = sorted(range(stop - start), key=lambda j: tuple(-keys[:, j]))
            vecs[:, start:stop] = vecs[:, start:stop][:, perm]
        start = stop
    return vals, vecs


def lowest(A, B, k: int = 1, tol: float = 1e-9, maxiter: int = 5000,
           lower_bound: Optional[float] = None, coords: Optional[np.ndarray] = None) -> Eigenpairs:
    """k smallest eigenpairs of the symmetric pencil (A, B) with B positive definite.

    The first shift lies below the Gershgorin bound of the pencil (or below
    ``lower_bound`` when a valid one is known, e.g. 0 for a positive
    semidefinite A). A coarse run there locates the bottom of the spectrum;
    the second shift is placed just below it and certified by the inertia of
    its own factorization before the final run.
    """
    n = A.shape[0]
    if B.shape != A.shape:
        raise ValueError("A and B must have the same shape")
    k = int(k)
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for n={n}")
    if n <= DENSE_LIMIT or k >= n - 1:
        try:
            w, V = sla.eigh(_dense(A), _dense(B))
        except np.linalg.LinAlgError as exc:
            raise FactorizationFailure(str(exc)) from exc
        w, V = _normalize_order(w[:k], V[:, :k], sp.csr_matrix(B))
        return Eigenpairs(w, V, _residuals(A, B, w, V), 0, float("nan"))

    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    v0 = np.ones(n)
    v0 /= np.sqrt(v0 @ (B @ v0))
    nev = min(k + 2, n - 2)

    sigma = gershgorin_lower(A, B)
    if lower_bound is not None:
        sigma = max(sigma, float(lower_bound))
    sigma = sigma - 1e-3 * max(1.0, abs(sigma))
    fac = factorize(A - sigma * B, coords)
    # Move the shift towards the bottom of the spectrum: each round estimates
    # the wanted eigenvalues coarsely and places a new shift below them,
    # certified by the inertia of its factorization. Rounds stop once the
    # shift is within a few gaps of the lowest eigenvalue.
    it1 = 0
    sigma2, fac2 = sigma, fac
    for _ in range(MAX_SHIFT_ROUNDS):
        w, _, it = _arpack(A, B, sigma2, nev, 1e-3, maxiter, v0, fac2)
        it1 += it
        lam = float(w[0])
        gap = max(float(w[min(k, len(w) - 1)] - w[k - 1]), 1e-12 * max(1.0, abs(lam)))
        dist = lam - sigma2
        if dist <= 10 * gap:
            break
        cand = lam - max(0.1 * gap, 1e-3 * dist)
        for _ in range(60):
            if cand <= sigma2:
                cand = None
                break
            try:
                f = factorize(A - cand * B, coords)
                neg = f.negative_count()
            except FactorizationFailure:
                neg = None
            if neg == 0:
                break
            cand = lam - 2 * (lam - cand)
        else:
            raise SolverNoConvergence("could not find a shift below the spectrum")
        if cand is None:
            break
        sigma2, fac2 = cand, f
    w, V, it2 = _arpack(A, B, sigma2, nev, tol * 1e-3, maxiter, v0, fac2)
    w, V = w[:k], V[:, :k]
    # residuals cannot drop below the round-off level of A itself
    floor = 100 * np.finfo(float).eps * sla_norm(A, np.inf) / sla_norm(B, np.inf)
    limit = np.maximum(tol * np.maximum(1.0, np.abs(w)), floor)
    res = _residuals(A, B, w, V)
    if np.any(res > limit):
        w, V = _refine(A, B, fac2, V)
        res = _residuals(A, B, w, V)
    w, V = _normalize_order(w, V, B)
    res = _residuals(A, B, w, V)
    if np.any(res > np.maximum(tol * np.maximum(1.0, np.abs(w)), floor)):
        raise SolverNoConvergence(f"residuals {res} exceed tolerance {tol}")
    return Eigenpairs(w, V, res, it1 + it2, sigma2)


def _arpack(A, B, sigma, nev, tol, maxiter, v0, lu):
    count = [0]

    def solve(x):
        count[0] += 1
        return lu.solve(np.asarray(x, dtype=float).ravel())

    op = LinearOperator(A.shape, matvec=solve, dtype=float)
    ncv = min(A.shape[0] - 1, max(2 * nev + 1, 20))
    try:
        w, V = eigsh(A, k=nev, M=B, sigma=sigma, which="LM", OPinv=op, v0=v0,
                     tol=tol, maxiter=maxiter, ncv=ncv)
    except ArpackNoConvergence as exc:
        raise SolverNoConvergence(str(exc)) from exc
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order], count[0]


def _refine(A, B, lu, V, steps: int = 3):
    """A few steps of subspace inverse iteration followed by Rayleigh-Ritz."""
    X = V
    for _ in range(steps):
        X = lu.solve(np.asarray(B @ X))
        X, _ = np.linalg.qr(X)
    Ar = X.T @ (A @ X)
    Br = X.T @ (B @ X)
    w, Y = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Br + Br.T))
    return w, X @ Y
