import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphrewire.graph import laplacian
from graphrewire.linalg import cdist, laplacian_pinv, laplacian_pinv_sqrt, psd_dominates, sym_eig, zero_eigen_count


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10 ** 6))
def test_sym_eig_against_numpy(n, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    M = M + M.T
    w, V = sym_eig(M)
    assert np.allclose(w, np.linalg.eigvalsh(M), atol=1e-10)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-10)
    assert np.allclose(M @ V, V * w, atol=1e-9)
    assert np.all(np.diff(w) >= -1e-12)


def test_sym_eig_deterministic_signs():
    M = np.diag([3.0, 1.0, 2.0])
    _, V = sym_eig(M)
    _, V2 = sym_eig(M.copy())
    assert np.array_equal(V, V2)
    for col in V.T:
        assert col[np.argmax(np.abs(col) > 1e-10)] > 0


def test_pinv_against_numpy(random_graphs):
    for g in random_graphs[:10]:
        L = laplacian(g)
        P = laplacian_pinv(L)
        assert np.allclose(P, np.linalg.pinv(L), atol=1e-10)
        S = laplacian_pinv_sqrt(L)
        assert np.allclose(S @ S, P, atol=1e-10)
        assert zero_eigen_count(sym_eig(L).eigenvalues) == 1


def test_cdist_naive_loop():
    Z = np.random.default_rng(0).standard_normal((7, 3))
    naive = np.array([[np.sqrt(sum((Z[i, k] - Z[j, k]) ** 2 for k in range(3))) for j in range(7)] for i in range(7)])
    assert np.allclose(cdist(Z), naive)
    assert np.allclose(cdist(Z, squared=True), naive ** 2)
    assert np.all(np.diag(cdist(Z)) == 0)


def test_psd_dominates():
    assert psd_dominates(2 * np.eye(3), np.eye(3))
    assert not psd_dominates(np.eye(3), 2 * np.eye(3))
    v = np.ones(3) / np.sqrt(3)
    assert psd_dominates(np.eye(3), np.outer(v, v))


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(Exception):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
