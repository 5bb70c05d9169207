import numpy as np
import pytest
from hypothesis import given, strategies as st

from tikreg.errors import RankDeficient, SingularSystem, ShapeMismatch
from tikreg.linalg import qr_reduced, solve_lls, solve_triangular, svd_thin


def _random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def test_qr_identity():
    Q, R = qr_reduced(np.eye(3))
    assert np.allclose(Q, np.eye(3), atol=1e-15)
    assert np.allclose(R, np.eye(3), atol=1e-15)


def test_qr_single_column_sign():
    Q, R = qr_reduced(np.array([[2.0], [0.0]]))
    assert np.allclose(Q, [[1.0], [0.0]])
    assert np.allclose(R, [[2.0]])


def test_qr_random_reconstruction(rng):
    M = rng.standard_normal((20, 8))
    Q, R = qr_reduced(M)
    assert np.linalg.norm(Q @ R - M) / np.linalg.norm(M) <= 1e-12
    assert np.linalg.norm(Q.T @ Q - np.eye(8)) <= 1e-12 * 8
    assert np.allclose(np.tril(R, -1), 0)
    assert np.all(np.diag(R) >= 0)


def test_qr_complex(rng):
    M = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    Q, R = qr_reduced(M)
    assert np.linalg.norm(Q @ R - M) <= 1e-12 * np.linalg.norm(M)
    assert np.all(np.diag(R).real >= 0) and np.allclose(np.diag(R).imag, 0)


def test_qr_rank_deficient():
    M = np.ones((5, 2))
    with pytest.raises(RankDeficient):
        qr_reduced(M)


def test_qr_rejects_nonfinite():
    with pytest.raises(ValueError):
        qr_reduced(np.array([[1.0], [np.nan]]))


def test_svd_diagonal():
    U, s, V = svd_thin(np.diag([3.0, 1.0]))
    assert np.allclose(s, [3, 1])
    assert np.allclose(np.abs(U), np.eye(2)) and np.allclose(np.abs(V), np.eye(2))


def test_svd_zero():
    _, s, _ = svd_thin(np.zeros((4, 2)))
    assert np.all(s == 0)


def test_svd_eigen_oracle(rng):
    M = rng.standard_normal((10, 6))
    _, s, _ = svd_thin(M)
    ev = np.sqrt(np.clip(np.sort(np.linalg.eigvalsh(M.T @ M))[::-1], 0, None))
    assert np.max(np.abs(s - ev)) <= 1e-10 * s[0]


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_svd_properties(m, k, seed):
    n = min(m, k)
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, n))
    U, s, V = svd_thin(M)
    nrm = max(np.linalg.norm(M), 1e-300)
    assert np.linalg.norm(U * s @ V.T - M) <= 1e-10 * nrm
    assert np.all(np.diff(s) <= 0)
    assert np.linalg.norm(U.T @ U - np.eye(n)) <= 1e-10
    assert np.linalg.norm(V.T @ V - np.eye(n)) <= 1e-10
    # orthogonal invariance
    s2 = svd_thin(_random_orthogonal(rng, m) @ M @ _random_orthogonal(rng, n))[1]
    assert np.max(np.abs(s2 - s)) <= 1e-10 * max(s[0], 1)


@given(st.integers(1, 200), st.integers(0, 2**31 - 1))
def test_qr_properties(n, seed):
    rng = np.random.default_rng(seed)
    m = n + int(rng.integers(0, 20))
    M = rng.standard_normal((m, n))
    Q, R = qr_reduced(M)
    assert np.linalg.norm(Q @ R - M) <= 1e-10 * np.linalg.norm(M)
    assert np.linalg.norm(Q.T @ Q - np.eye(n)) <= 1e-10


def test_triangular_identity(rng):
    b = rng.standard_normal(4)
    assert np.allclose(solve_triangular(np.eye(4), b), b)


def test_triangular_by_hand():
    x = solve_triangular(np.array([[1.0, 1.0], [0.0, 2.0]]), np.array([3.0, 4.0]))
    assert np.allclose(x, [1.0, 2.0])


def test_triangular_singular():
    with pytest.raises(SingularSystem):
        solve_triangular(np.array([[1.0, 1.0], [0.0, 1e-20]]), np.ones(2))


def test_lls_normal_equations(rng):
    M = rng.standard_normal((6, 3))
    b = rng.standard_normal(6)
    x = solve_lls(M, b)
    ref = np.linalg.solve(M.T @ M, M.T @ b)
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_lls_shape_mismatch(rng):
    with pytest.raises((ShapeMismatch, ValueError)):
        solve_lls(rng.standard_normal((6, 3)), np.ones(5))
