"""Spectral bases, Tikhonov filter factors and filtered solutions.

Every decomposition used in the package (SVD of ``A``, GSVD of ``{A, L}``, or
a transform that diagonalizes ``A`` and ``L_1..L_J`` simultaneously) is
exposed through :class:`SpectralBasis`:

* ``c``       -- per-index values of the forward operator (may be complex),
* ``s``       -- ``(n, J)`` magnitudes of the regularization spectra,
* ``analyze`` -- ``b -> P^H b``,
* ``synthesize`` -- ``v -> Z v``,
* ``adjoint`` -- ``x -> Z^H x``.

A filtered solution is ``x = Z (phi * gamma)`` with ``gamma = (P^H b) / c`` and
Tikhonov filter factors ``phi_i = |c_i|^2 / (|c_i|^2 + sum_j lam_j^2 |s_ij|^2)``.
Batched inputs put items along the leading axis.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidFactors, ShapeMismatch, SpectralMismatch
from .linalg import svd_thin

__all__ = [
    "SpectralBasis",
    "GsvdBasis",
    "SvdBasis",
    "FilterVector",
    "SpectralCoefficients",
    "coefficients",
    "tikhonov_filter_factors",
    "filter_jacobian",
    "tikhonov_filters",
    "tikhonov_filters_gsvd",
    "multi_tikhonov_filters",
    "apply_filtered_solution",
    "learn_optimal_error_filters",
    "psum",
]

IMAG_TOL = 1e-8


def psum(a, axis=0):
    """Sum along `axis` in value order, so the result ignores item order."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return psum(a.real, axis) + 1j * psum(a.imag, axis)
    return np.sort(a, axis=axis).sum(axis=axis)


class SpectralBasis:
    """Common interface of SVD, GSVD and transform decompositions.

    Subclasses set ``tag``, ``c``, ``s``, ``m``, ``q`` and ``orthonormal`` and
    implement ``analyze``, ``_synthesize`` and ``adjoint``.
    """

    tag = None
    orthonormal = False

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def J(self):
        return self.s.shape[1]

    def analyze(self, b):
        raise NotImplementedError

    def adjoint(self, x):
        raise NotImplementedError

    def _synthesize(self, v):
        raise NotImplementedError

    def synthesize(self, v):
        x = self._synthesize(v)
        if np.iscomplexobj(x):
            re, im = x.real, x.imag
            im_norm = np.linalg.norm(np.atleast_2d(im), axis=-1)
            re_norm = np.linalg.norm(np.atleast_2d(re), axis=-1)
            if np.any(im_norm > IMAG_TOL * np.maximum(re_norm, np.finfo(float).tiny)):
                raise SpectralMismatch(
                    f"imaginary residue {im_norm.max():.2e} in transform-path solution"
                )
            x = re
        return x

    def tail_energy(self, b, proj):
        """``||b||^2 - ||P^H b||^2`` clamped at zero (energy outside range(P))."""
        b = np.asarray(b)
        t = np.sum(np.abs(b) ** 2, axis=-1) - np.sum(np.abs(proj) ** 2, axis=-1)
        return np.maximum(t, 0.0)

    @property
    def scale(self):
        """Typical magnitude of ``|c|/|s|`` used to place parameter search intervals."""
        cs = np.abs(self.c)[:, None]
        s = self.s
        ok = s > 1e-14 * max(s.max(), 1e-300)
        if not np.any(ok):
            return 1.0
        ratios = (cs * np.ones_like(s))[ok] / s[ok]
        ratios = ratios[ratios > 0]
        return float(ratios.max()) if ratios.size else 1.0


class GsvdBasis(SpectralBasis):
    tag = "gsvd"

    def __init__(self, factors):
        self.factors = factors
        self.c = factors.c
        self.s = factors.s_full[:, None]
        self.m = factors.m
        self.q = factors.q

    def analyze(self, b):
        return np.asarray(b) @ self.factors.P

    def _synthesize(self, v):
        return np.asarray(v) @ self.factors.Z.T

    def adjoint(self, x):
        return np.asarray(x) @ self.factors.Z


class SvdBasis(SpectralBasis):
    """Standard-form basis: ``A = U diag(sigma) V^T``, ``L = I``."""

    tag = "svd"
    orthonormal = True

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        self.U, self.c, self.V = svd_thin(A)
        self.s = np.ones((self.c.shape[0], 1))
        self.m = A.shape[0]
        self.q = self.c.shape[0]

    def analyze(self, b):
        return np.asarray(b) @ self.U

    def _synthesize(self, v):
        return np.asarray(v) @ self.V.T

    def adjoint(self, x):
        return np.asarray(x) @ self.V


@dataclass(frozen=True)
class FilterVector:
    phi: np.ndarray
    basis_tag: str

    def to_json(self):
        return {"basis_tag": self.basis_tag, "phi": [float(v) for v in self.phi]}

    @classmethod
    def from_json(cls, d):
        return cls(phi=np.asarray(d["phi"], dtype=float), basis_tag=d["basis_tag"])

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class SpectralCoefficients:
    """``proj = P^H b``, ``gamma = proj / c`` (0 where c = 0) and the tail energy."""

    proj: np.ndarray
    gamma: np.ndarray
    tail_energy: np.ndarray


def coefficients(basis, b):
    b = np.asarray(b)
    if b.shape[-1] != basis.m:
        raise ShapeMismatch(f"data has length {b.shape[-1]}, operator has {basis.m} rows")
    proj = basis.analyze(b)
    c = basis.c
    nz = np.abs(c) > 0
    gamma = np.zeros(proj.shape, dtype=np.result_type(proj, c))
    gamma[..., nz] = proj[..., nz] / c[nz]
    return SpectralCoefficients(proj=proj, gamma=gamma, tail_energy=basis.tail_energy(b, proj))


def _lam_vector(lam, J):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (J,):
        raise ShapeMismatch(f"expected {J} regularization parameters, got {lam.shape}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("regularization parameters must be finite and non-negative")
    return lam


def tikhonov_filter_factors(c, s, lam):
    """``phi_i = |c_i|^2 / (|c_i|^2 + sum_j lam_j^2 |s_ij|^2)``; 0 where c_i = 0."""
    c2 = np.abs(np.asarray(c)) ** 2
    s2 = np.asarray(s, dtype=float) ** 2
    if s2.ndim == 1:
        s2 = s2[:, None]
    lam = _lam_vector(lam, s2.shape[1])
    bad = (c2 == 0) & np.all(s2 == 0, axis=1)
    if np.any(bad):
        raise InvalidFactors(f"c and s vanish together at indices {np.flatnonzero(bad).tolist()}")
    den = c2 + s2 @ lam**2
    phi = np.zeros_like(c2)
    pos = c2 > 0
    phi[pos] = c2[pos] / den[pos]
    return phi


def filter_jacobian(c, s, lam):
    """Derivatives ``Psi[i, j] = d phi_i / d lam_j = -2 T_i |s_ij|^2 lam_j``.

    Returns ``(Psi, T, Sbar)`` with ``T_i = |c_i|^2 / den_i^2`` and
    ``Sbar = |s|^2``.
    """
    c2 = np.abs(np.asarray(c)) ** 2
    Sbar = np.asarray(s, dtype=float) ** 2
    if Sbar.ndim == 1:
        Sbar = Sbar[:, None]
    lam = _lam_vector(lam, Sbar.shape[1])
    den = c2 + Sbar @ lam**2
    T = np.zeros_like(c2)
    pos = c2 > 0
    T[pos] = c2[pos] / den[pos] ** 2
    Psi = -2.0 * T[:, None] * Sbar * lam[None, :]
    return Psi, T, Sbar


def tikhonov_filters(basis, lam):
    return FilterVector(tikhonov_filter_factors(basis.c, basis.s, lam), basis.tag)


def tikhonov_filters_gsvd(factors, lam):
    """One-parameter general-form Tikhonov filters from GSVD factors."""
    lam = float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return FilterVector(tikhonov_filter_factors(factors.c, factors.s_full, [lam]), "gsvd")


def multi_tikhonov_filters(basis, lam):
    """Multi-parameter filters on a simultaneously diagonalized operator family."""
    return tikhonov_filters(basis, lam)


def apply_filtered_solution(coeffs, phi, basis):
    """``x = Z (phi * gamma)``; real output (transform paths check the imaginary part)."""
    phi = phi.phi if isinstance(phi, FilterVector) else np.asarray(phi)
    return basis.synthesize(phi * coeffs.gamma)


def learn_optimal_error_filters(ts, chunk=16):
    """Free filter factors minimizing the training squared 2-norm error.

    Parameters
    ----------
    ts : TrainingSet
        Needs ``basis``, ``gamma`` (K, n) and ``x_true`` (K, n).
    chunk : int
        Items per block in the streamed least-squares (non-orthonormal bases).

    Returns
    -------
    FilterVector, diagnostics
        `diagnostics` is a dict with ``zero_indices``: indices whose
        coefficients vanish on every training item (filter set to 0).
    """
    basis = ts.basis
    gamma = np.asarray(ts.gamma)
    X = np.asarray(ts.x_true, dtype=float)
    n = basis.n
    phi = np.zeros(n)

    if basis.orthonormal:
        beta = basis.adjoint(X)
        num = psum((np.conj(gamma) * beta).real)
        den = psum(np.abs(gamma) ** 2)
        zero = den < 1e-14
        phi[~zero] = num[~zero] / den[~zero]
        return FilterVector(phi, basis.tag), {"zero_indices": np.flatnonzero(zero).tolist()}

    q = basis.q
    Z = basis.factors.Z if hasattr(basis, "factors") else None
    if Z is None:
        raise ShapeMismatch("non-orthonormal basis without an explicit Z")
    Zh, Zt = Z[:, :q], Z[:, q:]
    scale = np.sqrt(psum(np.abs(gamma[:, :q]) ** 2))
    zero = scale < 1e-14 * max(scale.max(), 1e-300)
    active = np.flatnonzero(~zero)
    # streamed QR of the stacked system  [Zh diag(gamma_k)] phi = x_k - Zt gamma_tail_k
    R = np.zeros((0, active.size))
    qty = np.zeros(0)
    K = gamma.shape[0]
    for start in range(0, K, chunk):
        blocks, rhs = [R], [qty]
        for k in range(start, min(start + chunk, K)):
            blocks.append(Zh[:, active] * gamma[k, active])
            rhs.append(X[k] - Zt @ gamma[k, q:])
        M = np.vstack(blocks)
        y = np.concatenate(rhs)
        Qb, R = np.linalg.qr(M, mode="reduced")
        qty = Qb.T @ y
    sol, *_ = np.linalg.lstsq(R, qty, rcond=None)
    phi[active] = sol
    phi[q:] = 1.0
    return FilterVector(phi, basis.tag), {"zero_indices": np.flatnonzero(zero).tolist()}
