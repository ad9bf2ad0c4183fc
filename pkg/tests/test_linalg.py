import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from wslab import linalg
from wslab.errors import FactorizationFailure


def _laplace_1d(n: int, length: float = 1.0):
    h = length / (n + 1)
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h
    M = sp.diags([np.ones(n - 1), 4 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) * h / 6
    return K.tocsr(), M.tocsr()


def test_dirichlet_interval_ground_state():
    K, M = _laplace_1d(127)
    res = linalg.lowest(K, M, 3, tol=1e-12)
    exact = np.pi ** 2 * np.array([1, 4, 9])
    assert np.allclose(res.values, exact, rtol=2e-3)
    assert np.all(res.values > exact)  # conforming elements bound from above
    assert res.residuals.max() < 1e-8


def test_identical_pencil_gives_ones():
    _, M = _laplace_1d(50)
    res = linalg.lowest(M, M, 2)
    assert np.allclose(res.values, 1.0, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), shift=st.floats(-3.0, 3.0))
def test_inertia_matches_dense(seed, shift):
    rng = np.random.default_rng(seed)
    n = 40
    R = sp.random(n, n, density=0.1, random_state=rng)
    S = (R + R.T + sp.diags(rng.normal(size=n))).tocsr() - shift * sp.identity(n)
    ev = np.linalg.eigvalsh(S.toarray())
    if np.min(np.abs(ev)) < 1e-8:
        return
    assert linalg.inertia(S.tocsr()) == (int(np.sum(ev < 0)), int(np.sum(ev > 0)))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_psd_perturbation_never_lowers_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    K, M = _laplace_1d(60)
    x = rng.normal(size=(60, 3))
    P = sp.csr_matrix(x @ x.T)
    a = linalg.lowest(K, M, 3).values
    b = linalg.lowest((K + P).tocsr(), M, 3).values
    assert np.all(b >= a - 1e-8 * np.abs(a))


def test_psd_test():
    K, M = _laplace_1d(40)
    lam = linalg.lowest(K, M, 1, tol=1e-12).values[0]
    assert linalg.is_positive_semidefinite(K - 0.99 * lam * M)
    assert not linalg.is_positive_semidefinite(K - 1.01 * lam * M)


def test_gershgorin_bound_is_below_spectrum():
    K, M = _laplace_1d(30)
    assert linalg.gershgorin_lower(K, M) <= linalg.lowest(K, M, 1).values[0]


def test_solver_is_deterministic():
    K, M = _laplace_1d(200)
    a, b = linalg.lowest(K, M, 2), linalg.lowest(K, M, 2)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.vectors, b.vectors)


def test_eigenvectors_are_b_orthonormal_with_fixed_sign():
    K, M = _laplace_1d(80)
    res = linalg.lowest(K, M, 3)
    G = res.vectors.T @ (M @ res.vectors)
    assert np.allclose(G, np.eye(3), atol=1e-10)
    assert res.vectors[:, 0].sum() > 0


def test_nested_dissection_is_a_permutation():
    n = 30
    coords = np.random.default_rng(1).normal(size=(n * n, 3))
    S = sp.identity(n * n, format="csr")
    perm = linalg.nested_dissection(S, coords, leaf=16)
    assert np.array_equal(np.sort(perm), np.arange(n * n))


def test_singular_factorization_is_reported():
    S = sp.csr_matrix(np.zeros((3, 3)))
    with pytest.raises(FactorizationFailure):
        linalg.factorize(S).solve(np.ones(3))
