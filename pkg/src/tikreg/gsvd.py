"""Generalized SVD of a matrix pair via stacked QR and a CS decomposition.

For ``A`` (m x n, m >= n) and ``L`` (p x n) with trivially intersecting null
spaces we compute

    A = P diag(c) Zinv,      L = Pbar S Zinv,      Zinv = W^T R,

with ``c_i**2 + s_i**2 = 1`` on the first ``min(n, p)`` indices, ``c``
descending, ``s`` ascending, and ``c_i = 1`` on the trailing ``n - p`` indices
(the null space of ``L``) when ``p < n``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalBreakdown, ShapeMismatch
from .linalg import qr_reduced, solve_triangular, svd_thin

__all__ = ["GsvdFactors", "gsvd", "generalized_singular_values"]

SMALL_S = 1e-14


@dataclass(frozen=True)
class GsvdFactors:
    """GSVD factors of ``{A, L}``.

    Attributes
    ----------
    P : (m, n) ndarray
        Leading ``n`` columns of the left factor of ``A``.
    Pbar : (p, min(n, p)) ndarray
        Left factor of ``L``.
    c : (n,) ndarray
    s : (min(n, p),) ndarray
    Z : (n, n) ndarray
        Solution basis, ``Z = Zinv^{-1}``.
    Zinv : (n, n) ndarray
    """

    P: np.ndarray
    Pbar: np.ndarray
    c: np.ndarray
    s: np.ndarray
    Z: np.ndarray
    Zinv: np.ndarray

    @property
    def m(self):
        return self.P.shape[0]

    @property
    def n(self):
        return self.P.shape[1]

    @property
    def p(self):
        return self.Pbar.shape[0]

    @property
    def q(self):
        """Number of interior indices, ``min(n, p)``."""
        return self.s.shape[0]

    @property
    def s_full(self):
        """``s`` padded with zeros on the trailing indices (length n)."""
        out = np.zeros(self.n)
        out[: self.q] = self.s
        return out

    def S(self):
        """The min(n, p) x n matrix with ``s`` on its leading diagonal."""
        S = np.zeros((self.q, self.n))
        S[np.arange(self.q), np.arange(self.q)] = self.s
        return S


def _complete_column(Pbar_cols, p):
    """Unit vector orthogonal to the columns in ``Pbar_cols`` (deterministic)."""
    best, best_norm = None, -1.0
    for j in range(p):
        v = np.zeros(p)
        v[j] = 1.0
        for _ in range(2):
            if Pbar_cols:
                B = np.column_stack(Pbar_cols)
                v = v - B @ (B.T @ v)
        nv = np.linalg.norm(v)
        if nv > best_norm:
            best, best_norm = v, nv
        if nv > 0.5:
            break
    return best / best_norm


def gsvd(A, L):
    """Compute the GSVD of ``{A, L}``.

    Raises
    ------
    RankDeficient
        If ``[A; L]`` does not have full column rank.
    NumericalBreakdown
        If the computed ``Pbar`` loses orthonormality beyond 1e-8.
    """
    A = np.asarray(A, dtype=float)
    L = np.asarray(L, dtype=float)
    if A.ndim != 2 or L.ndim != 2 or A.shape[1] != L.shape[1]:
        raise ShapeMismatch(f"incompatible shapes A{A.shape}, L{L.shape}")
    m, n = A.shape
    p = L.shape[0]
    if m < n:
        raise ShapeMismatch(f"gsvd requires m >= n, got A{A.shape}")
    q = min(n, p)

    Q, R = qr_reduced(np.vstack([A, L]))
    QA, QL = Q[:m], Q[m:]
    U, c, W = svd_thin(QA)
    c = np.minimum(c, 1.0)
    B = QL @ W
    s = np.linalg.norm(B, axis=0)

    # The n - q largest cosines are the null-space directions of L; move them
    # to the end. Interior indices are ordered by the angle atan2(s, c).
    trailing = np.arange(n - q)
    interior = np.arange(n - q, n)
    theta = np.arctan2(s[interior], c[interior])
    interior = interior[np.argsort(theta, kind="stable")]
    perm = np.concatenate([interior, trailing])

    P = U[:, perm]
    W = W[:, perm]
    c = c[perm]
    B = B[:, perm]
    c[q:] = 1.0
    s = s[perm][:q]

    # Pbar columns from B, largest s first, re-orthogonalized against the
    # columns already accepted; completion only when nothing is left.
    cols = [None] * q
    accepted = []
    for i in range(q - 1, -1, -1):
        v = B[:, i].copy()
        if s[i] > 0:
            v /= s[i]
            for _ in range(2):
                if accepted:
                    M = np.column_stack(accepted)
                    v = v - M @ (M.T @ v)
            nv = np.linalg.norm(v)
        else:
            nv = 0.0
        if nv > 1e-8:
            v = v / nv
        else:
            v = _complete_column(accepted, p)
        cols[i] = v
        accepted.append(v)
    Pbar = np.column_stack(cols) if q else np.zeros((p, 0))

    defect = np.linalg.norm(Pbar.T @ Pbar - np.eye(q)) if q else 0.0
    if defect > 1e-8:
        raise NumericalBreakdown(f"CS decomposition lost orthogonality ({defect:.2e})")

    Zinv = W.T @ R
    Z = solve_triangular(R, W)
    return GsvdFactors(P=P, Pbar=Pbar, c=c, s=s, Z=Z, Zinv=Zinv)


def generalized_singular_values(f, tol=SMALL_S):
    """Generalized singular values ``t_i = c_i / s_i`` for ``i < min(n, p)``.

    Returns
    -------
    t : (min(n, p),) ndarray
        Entries with ``s_i <= tol`` are set to 0 and listed in `infinite`.
    infinite : (k,) ndarray of int
        Indices where ``s_i`` vanishes (t would be infinite).
    """
    c = f.c[: f.q]
    s = f.s
    infinite = np.flatnonzero(s <= tol)
    t = np.zeros_like(s)
    ok = s > tol
    t[ok] = c[ok] / s[ok]
    return t, infinite
