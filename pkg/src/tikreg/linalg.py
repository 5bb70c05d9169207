"""Dense factorizations used by the GSVD and least-squares code.

Thin wrappers over LAPACK (via numpy/scipy) that pin down sign conventions
and turn rank or convergence problems into package exceptions.
"""

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, RankDeficient, ShapeMismatch, SingularSystem

__all__ = ["qr_reduced", "svd_thin", "solve_triangular", "solve_lls"]


def _as_matrix(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ShapeMismatch(f"expected a non-empty 2D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if not np.iscomplexobj(M):
        M = M.astype(float, copy=False)
    return M


def qr_reduced(M, rank_tol=1e-12):
    """Reduced Householder QR with a non-negative diagonal in R.

    Parameters
    ----------
    M : (r, c) array_like, r >= c
    rank_tol : float
        Relative tolerance on ``|R_ii|`` against the Frobenius norm of `M`.

    Returns
    -------
    Q : (r, c) ndarray
        Orthonormal columns.
    R : (c, c) ndarray
        Upper triangular, ``R_ii >= 0``.
    """
    M = _as_matrix(M)
    r, c = M.shape
    if r < c:
        raise ShapeMismatch(f"qr_reduced needs rows >= cols, got {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    d = np.diag(R)
    absd = np.abs(d)
    # phase of the diagonal; zero entries keep phase 1
    phase = np.where(absd > 0, d / np.where(absd > 0, absd, 1), 1)
    Q = Q * phase
    R = np.conj(phase)[:, None] * R
    norm = np.linalg.norm(M)
    if norm == 0 or np.min(absd) <= rank_tol * norm:
        raise RankDeficient(
            f"matrix is numerically rank deficient (min |R_ii| = {np.min(absd):.3e}, "
            f"||M|| = {norm:.3e})"
        )
    return Q, R


def svd_thin(M):
    """Thin SVD ``M = U diag(sigma) V^H`` with descending singular values.

    Returns ``(U, sigma, V)``; note `V`, not its transpose.
    """
    M = _as_matrix(M)
    if M.shape[0] < M.shape[1]:
        raise ShapeMismatch(f"svd_thin needs rows >= cols, got {M.shape}")
    try:
        U, sigma, Vh = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
    return U, sigma, Vh.conj().T


def solve_triangular(R, rhs, lower=False):
    """Back/forward substitution with a guard against tiny pivots."""
    R = _as_matrix(R)
    d = np.abs(np.diag(R))
    if d.size == 0 or np.min(d) <= 1e-14 * np.max(d) or np.max(d) == 0:
        raise SingularSystem("triangular factor has a (near) zero diagonal entry")
    return sla.solve_triangular(R, np.asarray(rhs), lower=lower)


def solve_lls(M, rhs):
    """Least-squares solution of ``M x ~= rhs`` by reduced QR (full column rank)."""
    M = _as_matrix(M)
    rhs = np.asarray(rhs)
    if rhs.shape[0] != M.shape[0]:
        raise ShapeMismatch(f"rhs has {rhs.shape[0]} rows, matrix has {M.shape[0]}")
    Q, R = qr_reduced(M)
    return solve_triangular(R, Q.conj().T @ rhs)
