"""Convolution operators diagonalized by the DFT (periodic) or DCT (reflexive).

Images are vectorized in row-major order. Kernels (PSFs and stencils) carry
a zero-based center index; applying a kernel ``k`` with center ``c`` means

    (A x)[i] = sum_u k[u] x[bc(i - (u - c))]

where ``bc`` maps out-of-range indices periodically, by half-sample
reflection, or to zero.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import aslinearoperator, LinearOperator

from .errors import ConfigError, ConvergenceFailure, ShapeMismatch, SymmetryViolation
from .filters import SpectralBasis
from .learn import train_multi

__all__ = [
    "STENCILS",
    "stencil",
    "gaussian_psf",
    "psf_center",
    "convolve_bc",
    "dense_operator",
    "SpectralOperator",
    "TransformBasis",
    "build_spectral_operator",
    "check_double_symmetry",
    "surrogate_parameters",
    "solve_multi_tikhonov_general",
    "CgInfo",
]

BCS = ("periodic", "reflexive", "zero")

STENCILS = {
    "l1": np.array([[0.0, 0, 0], [0, 1, 0], [0, 0, 0]]),
    "l2": np.array([[0.0, 0, 0], [1, -2, 1], [0, 0, 0]]),
    "l3": np.array([[0.0, 1, 0], [0, -2, 0], [0, 1, 0]]),
    "l4": np.array([[0.0, 1, 0], [1, -4, 1], [0, 1, 0]]),
    # one-dimensional counterparts
    "i1": np.array([0.0, 1, 0]),
    "d2": np.array([1.0, -2, 1]),
}


def stencil(name):
    """Kernel and center of a named regularization stencil."""
    try:
        k = STENCILS[name]
    except KeyError:
        raise ConfigError(f"unknown stencil {name!r}; known: {sorted(STENCILS)}") from None
    return k, tuple(s // 2 for s in k.shape)


def psf_center(shape):
    """Zero-based center ``ceil(N/2) - 1`` per axis."""
    return tuple(int(np.ceil(N / 2)) - 1 for N in shape)


def gaussian_psf(shape, variance=1.0):
    """Isotropic Gaussian PSF on the grid, normalized to unit sum.

    Entries whose mirror image about the center falls off the grid (the last
    row/column of an even-sized grid) are zeroed so the PSF is exactly doubly
    symmetric.
    """
    shape = tuple(int(N) for N in shape)
    center = psf_center(shape)
    axes = [np.arange(N) - c for N, c in zip(shape, center)]
    r2 = sum(np.meshgrid(*[a**2 for a in axes], indexing="ij"))
    psf = np.exp(-r2 / (2.0 * variance))
    for ax, (a, c) in enumerate(zip(axes, center)):
        keep = (a <= c).reshape([-1 if i == ax else 1 for i in range(len(shape))])
        psf = psf * keep
    return psf / psf.sum(), center


def _index_map(N, offset, bc):
    idx = np.arange(N) - offset
    if bc == "periodic":
        return np.mod(idx, N), None
    if bc == "reflexive":
        r = np.mod(idx, 2 * N)
        return np.where(r < N, r, 2 * N - 1 - r), None
    valid = (idx >= 0) & (idx < N)
    return np.clip(idx, 0, N - 1), valid


def convolve_bc(x, kernel, center, bc):
    """Apply a convolution kernel to ``x[..., *grid]`` under a boundary condition."""
    if bc not in BCS:
        raise ConfigError(f"boundary condition must be one of {BCS}, got {bc!r}")
    kernel = np.asarray(kernel, dtype=float)
    x = np.asarray(x)
    d = kernel.ndim
    grid = x.shape[-d:]
    out = np.zeros(x.shape, dtype=np.result_type(x, float))
    for u in zip(*np.nonzero(kernel)):
        y = x
        mask = None
        for ax, (N, ui, ci) in enumerate(zip(grid, u, center)):
            idx, valid = _index_map(N, ui - ci, bc)
            y = np.take(y, idx, axis=x.ndim - d + ax)
            if valid is not None:
                shape = [1] * d
                shape[ax] = N
                v = valid.reshape(shape)
                mask = v if mask is None else (mask & v)
        if mask is not None:
            y = y * mask
        out += kernel[u] * y
    return out


def dense_operator(kernel, center, shape, bc):
    """Assemble the dense matrix of `convolve_bc` on a grid of `shape`."""
    n = int(np.prod(shape))
    E = np.eye(n).reshape((n,) + tuple(shape))
    cols = convolve_bc(E, kernel, center, bc).reshape(n, n)
    return cols.T


def _embed(kernel, center, shape):
    """Place `kernel` on a zero grid and roll its center to the origin."""
    kernel = np.asarray(kernel, dtype=float)
    if any(k > N for k, N in zip(kernel.shape, shape)):
        raise ShapeMismatch(f"kernel {kernel.shape} does not fit grid {tuple(shape)}")
    big = np.zeros(shape)
    big[tuple(slice(0, k) for k in kernel.shape)] = kernel
    return np.roll(big, [-c for c in center], axis=tuple(range(len(shape))))


def check_double_symmetry(kernel, center, tol=1e-10):
    """Raise SymmetryViolation unless ``kernel`` is symmetric about `center` on every axis."""
    kernel = np.asarray(kernel, dtype=float)
    h = [max(c, N - 1 - c) for N, c in zip(kernel.shape, center)]
    pad = [(hi - c, hi - (N - 1 - c)) for N, c, hi in zip(kernel.shape, center, h)]
    K = np.pad(kernel, pad)
    scale = np.max(np.abs(kernel)) or 1.0
    for ax in range(K.ndim):
        dev = np.max(np.abs(K - np.flip(K, axis=ax)))
        if dev > tol * scale:
            raise SymmetryViolation(
                f"kernel is not symmetric about its center along axis {ax} (deviation {dev:.2e})"
            )


def _fwd(x, kind, d):
    axes = tuple(range(-d, 0))
    if kind == "dct":
        return sfft.dctn(x, type=2, norm="ortho", axes=axes)
    return sfft.fftn(x, norm="ortho", axes=axes)


def _inv(v, kind, d):
    axes = tuple(range(-d, 0))
    if kind == "dct":
        return sfft.idctn(v, type=2, norm="ortho", axes=axes)
    return sfft.ifftn(v, norm="ortho", axes=axes)


@dataclass(frozen=True)
class SpectralOperator:
    """A blur and its regularization stencils diagonalized by one transform.

    Attributes
    ----------
    transform : str
        ``"dft"`` (periodic) or ``"dct"`` (reflexive).
    shape : tuple
        Image grid.
    c_spectrum : ndarray, shape `shape`
    s_spectra : ndarray, shape ``(J,) + shape``
    psf, center :
        Generating PSF and its zero-based center.
    stencils : tuple of str
    bad_ratio_indices : list
        Flat indices where the first-column ratio could not be formed.
    """

    transform: str
    shape: tuple
    c_spectrum: np.ndarray
    s_spectra: np.ndarray
    psf: np.ndarray
    center: tuple
    stencils: tuple
    bad_ratio_indices: list = field(default_factory=list)

    @property
    def bc(self):
        return "periodic" if self.transform == "dft" else "reflexive"

    @property
    def n(self):
        return int(np.prod(self.shape))

    @property
    def J(self):
        return self.s_spectra.shape[0]

    def basis(self, select=None):
        """Spectral basis using all stencils, or the subset `select` (indices)."""
        return TransformBasis(self, select)

    def apply(self, x):
        """``A x`` through the transform; `x` has trailing grid axes."""
        d = len(self.shape)
        y = _inv(self.c_spectrum * _fwd(x, self.transform, d), self.transform, d)
        return y.real if np.iscomplexobj(y) else y

    def apply_L(self, j, x):
        d = len(self.shape)
        y = _inv(self.s_spectra[j] * _fwd(x, self.transform, d), self.transform, d)
        return y.real if np.iscomplexobj(y) else y

    def stencil_kernels(self):
        return [stencil(name) for name in self.stencils]

    def linear_operators(self, bc=None):
        """Matrix-free ``A`` and ``L_j`` under boundary condition `bc` (default: own).

        Returned objects are scipy LinearOperators on row-major vectors.
        """
        bc = bc or self.bc
        ops = [_conv_operator(self.psf, self.center, self.shape, bc)]
        for k, c in self.stencil_kernels():
            ops.append(_conv_operator(k, c, self.shape, bc))
        return ops[0], ops[1:]

    def with_transform(self, transform):
        """Same PSF and stencils, re-diagonalized with another transform."""
        bc = "periodic" if transform == "dft" else "reflexive"
        return build_spectral_operator(self.psf, bc, self.shape, self.stencils, self.center)


def _conv_operator(kernel, center, shape, bc):
    n = int(np.prod(shape))
    flipped = np.flip(kernel)
    fcenter = tuple(k - 1 - c for k, c in zip(kernel.shape, center))

    def mv(v):
        return convolve_bc(np.ravel(v).reshape(shape), kernel, center, bc).ravel()

    def rmv(v):
        return convolve_bc(np.ravel(v).reshape(shape), flipped, fcenter, bc).ravel()

    return LinearOperator((n, n), matvec=mv, rmatvec=rmv, dtype=float)


class TransformBasis(SpectralBasis):
    tag = "transform"
    orthonormal = True

    def __init__(self, op, select=None):
        self.op = op
        sel = list(range(op.J)) if select is None else list(select)
        self.select = sel
        self.c = op.c_spectrum.ravel()
        self.s = np.abs(op.s_spectra[sel].reshape(len(sel), -1).T)
        self.m = op.n
        self.q = op.n

    def _grid(self, v):
        v = np.asarray(v)
        return v.reshape(v.shape[:-1] + tuple(self.op.shape))

    def analyze(self, b):
        b = np.asarray(b)
        d = len(self.op.shape)
        return _fwd(self._grid(b), self.op.transform, d).reshape(b.shape)

    adjoint = analyze

    def _synthesize(self, v):
        v = np.asarray(v)
        d = len(self.op.shape)
        return _inv(self._grid(v), self.op.transform, d).reshape(v.shape)


def build_spectral_operator(psf, bc, shape=None, stencils=("l1", "l2", "l3", "l4"), center=None):
    """Diagonalize a PSF and stencils with the DFT (periodic) or DCT (reflexive).

    Periodic spectra are transforms of the center-shifted kernels. Reflexive
    spectra use the first-column ratio ``dct(A e1) / dct(e1)``.
    """
    psf = np.asarray(psf, dtype=float)
    shape = tuple(psf.shape if shape is None else shape)
    center = psf_center(psf.shape) if center is None else tuple(center)
    stencils = tuple(stencils)
    kernels = [(psf, center)] + [stencil(name) for name in stencils]
    for k, _ in kernels:
        if k.ndim != len(shape):
            raise ShapeMismatch(f"kernel of ndim {k.ndim} on a {len(shape)}-d grid")
    d = len(shape)
    bad = []
    if bc == "periodic":
        spectra = [sfft.fftn(_embed(k, c, shape)) for k, c in kernels]
        transform = "dft"
    elif bc == "reflexive":
        for k, c in kernels:
            check_double_symmetry(k, c)
        e1 = np.zeros(shape)
        e1[(0,) * d] = 1.0
        te1 = _fwd(e1, "dct", d)
        ok = np.abs(te1) > 1e-14
        spectra = []
        for k, c in kernels:
            num = _fwd(convolve_bc(e1, k, c, "reflexive"), "dct", d)
            sp = np.zeros(shape)
            sp[ok] = num[ok] / te1[ok]
            if not np.all(ok):
                # fall back to the shifted-kernel construction where e1 vanishes
                alt = sfft.dctn(_embed(k, c, shape), type=2) / np.sqrt(np.prod(shape))
                sp[~ok] = alt[~ok]
            spectra.append(sp)
        bad = np.flatnonzero(~ok).tolist()
        transform = "dct"
    else:
        raise ConfigError(f"spectral operators need periodic or reflexive bc, got {bc!r}")
    return SpectralOperator(
        transform=transform,
        shape=shape,
        c_spectrum=spectra[0],
        s_spectra=np.array(spectra[1:]).reshape((len(stencils),) + shape),
        psf=psf,
        center=center,
        stencils=stencils,
        bad_ratio_indices=bad,
    )


def surrogate_parameters(original, ts, rho, init=None):
    """Train multi-parameter Tikhonov on a periodic surrogate of `original`.

    The training pairs are re-expressed in the DFT basis of the periodic
    operator with the same PSF and stencils; the trained parameters are meant
    to be used on the original problem.
    """
    surrogate = original if original.transform == "dft" else original.with_transform("dft")
    return train_multi(ts.with_basis(surrogate.basis()), rho, init=init)


@dataclass
class CgInfo:
    iterations: int
    converged: bool
    normal_residuals: list
    ls_residuals: list


def solve_multi_tikhonov_general(
    A, Ls, b, lam, tol=1e-8, maxiter=1000, return_info=False, raise_on_failure=True
):
    """Solve ``(A^T A + sum_j lam_j^2 L_j^T L_j) x = A^T b`` matrix-free (CGLS).

    `A` and the entries of `Ls` may be arrays or scipy LinearOperators. The
    iteration stops when the normal-equations residual falls below
    ``tol * ||A^T b||``.
    """
    A = aslinearoperator(A)
    Ls = [aslinearoperator(L) for L in Ls]
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (len(Ls),):
        raise ShapeMismatch(f"{len(Ls)} regularization operators but {lam.size} parameters")
    b = np.asarray(b, dtype=float).ravel()
    n = A.shape[1]

    def fwd(x):
        return [A.matvec(x)] + [l * L.matvec(x) for l, L in zip(lam, Ls)]

    def adj(rs):
        out = A.rmatvec(rs[0])
        for l, L, r in zip(lam, Ls, rs[1:]):
            out = out + l * L.rmatvec(r)
        return out

    x = np.zeros(n)
    r = [b.copy()] + [np.zeros(L.shape[0]) for L in Ls]
    s = adj(r)
    norm0 = np.linalg.norm(s)
    p = s.copy()
    gamma = s @ s
    normal_res = [float(np.sqrt(gamma))]
    ls_res = [float(np.linalg.norm(b))]
    converged = norm0 == 0
    it = 0
    while not converged and it < maxiter:
        it += 1
        q = fwd(p)
        qq = sum(v @ v for v in q)
        if qq == 0:
            break
        alpha = gamma / qq
        x = x + alpha * p
        r = [ri - alpha * qi for ri, qi in zip(r, q)]
        s = adj(r)
        gnew = s @ s
        normal_res.append(float(np.sqrt(gnew)))
        ls_res.append(float(np.sqrt(sum(v @ v for v in r))))
        if np.sqrt(gnew) <= tol * norm0:
            converged = True
            break
        p = s + (gnew / gamma) * p
        gamma = gnew
    info = CgInfo(it, converged, normal_res, ls_res)
    if not converged and raise_on_failure:
        raise ConvergenceFailure(
            f"CG reached {maxiter} iterations, relative residual "
            f"{normal_res[-1] / max(norm0, 1e-300):.2e}",
            residual=normal_res[-1] / max(norm0, 1e-300),
        )
    return (x, info) if return_info else x
