"""Empirical Bayes risk minimization for Tikhonov regularization parameters.

Given training pairs ``(b_k, x_k)`` and a spectral basis, the risk is

    f_K(lam) = (1/K) sum_k rho(x_lam(b_k) - x_k)

with ``x_lam`` the (multi-parameter) Tikhonov filtered solution. One
parameter is trained by a log-grid scan refined by bisection on ``f_K'``;
several parameters by damped Gauss-Newton.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryMinimum, ShapeMismatch, StallNoDescent
from .filters import coefficients, filter_jacobian, psum, tikhonov_filter_factors

__all__ = [
    "TrainingSet",
    "TrainResult",
    "GnState",
    "empirical_risk",
    "risk_derivative_scalar",
    "risk_second_derivative_scalar",
    "train_scalar",
    "gn_assemble",
    "gn_hessian_sq2norm",
    "train_multi",
    "golden_section",
]

SCALAR_SEARCH = (1e-6, 1e3)
GN_INIT = 0.1
MAX_DAMPING_RAISES = 8


class TrainingSet:
    """Training pairs with their spectral coefficients precomputed.

    Parameters
    ----------
    b : (K, m) array_like
    x_true : (K, n) array_like
    basis : SpectralBasis
    """

    def __init__(self, b, x_true, basis):
        b = np.atleast_2d(np.asarray(b, dtype=float))
        x_true = np.atleast_2d(np.asarray(x_true, dtype=float))
        if b.shape[0] != x_true.shape[0] or b.shape[0] < 1:
            raise ShapeMismatch(f"{b.shape[0]} observations vs {x_true.shape[0]} truths")
        if x_true.shape[1] != basis.n:
            raise ShapeMismatch(f"truth length {x_true.shape[1]} != basis size {basis.n}")
        self.b = b
        self.x_true = x_true
        self.basis = basis
        self.coeffs = coefficients(basis, b)

    @property
    def K(self):
        return self.b.shape[0]

    @property
    def gamma(self):
        return self.coeffs.gamma

    def subset(self, idx):
        return TrainingSet(self.b[idx], self.x_true[idx], self.basis)

    def with_basis(self, basis):
        return TrainingSet(self.b, self.x_true, basis)


@dataclass
class TrainResult:
    lam: np.ndarray
    risk: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    def to_json(self):
        return {
            "lambda": [float(v) for v in self.lam],
            "risk": float(self.risk),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


@dataclass
class GnState:
    lam: np.ndarray
    risk: float
    g: np.ndarray
    H: np.ndarray
    Psi: np.ndarray
    Sbar: np.ndarray
    T: np.ndarray


def _errors(ts, lam):
    phi = tikhonov_filter_factors(ts.basis.c, ts.basis.s, lam)
    X = ts.basis.synthesize(ts.gamma * phi)
    return X - ts.x_true


def empirical_risk(ts, lam, rho):
    """Mean of ``rho`` over the training reconstruction errors."""
    E = _errors(ts, lam)
    return float(psum(rho.value(E)) / ts.K)


def _gradient_terms(ts, lam, rho, E=None):
    """Per-item gradient contributions ``Re Psi^T (conj(gamma_k) * Z^H grad_rho(e_k))``."""
    if E is None:
        E = _errors(ts, lam)
    Psi, T, Sbar = filter_jacobian(ts.basis.c, ts.basis.s, lam)
    w = ts.basis.adjoint(rho.gradient(E))
    terms = ((np.conj(ts.gamma) * w) @ Psi).real
    return terms, Psi, T, Sbar


def risk_derivative_scalar(ts, lam, rho):
    """``f_K'(lam)`` for a single-parameter basis."""
    if ts.basis.J != 1:
        raise ShapeMismatch("risk_derivative_scalar needs a one-parameter basis")
    terms, *_ = _gradient_terms(ts, [float(lam)], rho)
    return float(psum(terms[:, 0]) / ts.K)


def risk_second_derivative_scalar(ts, lam, rho, rel_step=1e-5):
    """Central-difference approximation of ``f_K''(lam)``."""
    h = rel_step * max(abs(lam), 1e-12)
    lo = max(lam - h, 0.0)
    return (risk_derivative_scalar(ts, lam + h, rho) - risk_derivative_scalar(ts, lo, rho)) / (
        lam + h - lo
    )


def golden_section(f, lo, hi, rel_width=1e-8, max_iter=200):
    """Minimize `f` on ``[lo, hi]`` (positive) by golden-section search in log space.

    Returns ``(x, fx, iterations)``.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(lo), np.log(hi)
    tol = np.log1p(rel_width)
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(np.exp(x1)), f(np.exp(x2))
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(np.exp(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(np.exp(x2))
    if f1 <= f2:
        return float(np.exp(x1)), f1, it
    return float(np.exp(x2)), f2, it


def _bisect_derivative(df, lo, hi, rel_width, max_iter=200):
    it = 0
    while np.log(hi / lo) > np.log1p(rel_width) and it < max_iter:
        it += 1
        mid = np.sqrt(lo * hi)
        if df(mid) > 0:
            hi = mid
        else:
            lo = mid
    return float(np.sqrt(lo * hi)), it


def train_scalar(ts, rho, search=SCALAR_SEARCH, n_grid=200, rel_width=1e-8):
    """Optimal single regularization parameter on a log-spaced search interval.

    A ``n_grid``-point log grid brackets the minimum; the bracket is refined
    by bisection on ``f_K'`` (differentiable ``rho``) or golden-section on
    ``f_K``. The returned parameter is never worse than the best grid point.
    """
    if ts.basis.J != 1:
        raise ShapeMismatch("train_scalar needs a one-parameter basis")
    lo, hi = search
    grid = np.logspace(np.log10(lo), np.log10(hi), n_grid)
    fgrid = np.array([empirical_risk(ts, [l], rho) for l in grid])
    i = int(np.argmin(fgrid))
    if i == 0 or i == n_grid - 1:
        warnings.warn(
            f"risk minimum at search boundary lambda={grid[i]:.3e}", BoundaryMinimum, stacklevel=2
        )
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]

    def f(l):
        return empirical_risk(ts, [l], rho)

    lam, iters = None, 0
    if rho.differentiable:

        def df(l):
            return risk_derivative_scalar(ts, l, rho)

        if df(a) < 0 < df(b):
            lam, iters = _bisect_derivative(df, a, b, rel_width)
            flam = f(lam)
    if lam is None:
        lam, flam, iters = golden_section(f, a, b, rel_width)
    if fgrid[i] < flam:
        lam, flam = float(grid[i]), float(fgrid[i])
    return TrainResult(np.array([lam]), float(flam), n_grid + iters, True)


def gn_assemble(ts, lam, rho):
    """Gradient and Gauss-Newton Hessian of the risk at `lam`.

    ``g = (1/K) sum_k J_k^H grad_rho(e_k)`` and
    ``H = (1/K) sum_k J_k^H F_k J_k`` with ``J_k = Z diag(gamma_k) Psi``.
    Real parts are taken (the risk is real).
    """
    lam = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
    E = _errors(ts, lam)
    risk = float(psum(rho.value(E)) / ts.K)
    terms, Psi, T, Sbar = _gradient_terms(ts, lam, rho, E)
    g = psum(terms) / ts.K

    K, n = ts.gamma.shape
    J = Psi.shape[1]
    cols = ts.gamma[:, None, :] * Psi.T[None, :, :]  # (K, J, n)
    Jk = ts.basis.synthesize(cols.reshape(K * J, n)).reshape(K, J, n)
    F = rho.hessian_diag(E)
    Hk = np.einsum("kji,ki,kli->kjl", Jk, F, Jk)
    H = psum(Hk) / K
    H = 0.5 * (H + H.T)
    return GnState(lam=lam, risk=risk, g=g, H=H, Psi=Psi, Sbar=Sbar, T=T)


def gn_hessian_sq2norm(ts, lam):
    """Closed-form Gauss-Newton Hessian for ``rho = 0.5 ||.||^2`` on a unitary basis.

    ``H = (4/K) Lam Sbar^T diag(T^2 sum_k |gamma_k|^2) Sbar Lam``.
    """
    lam = np.abs(np.atleast_1d(np.asarray(lam, dtype=float)))
    _, T, Sbar = filter_jacobian(ts.basis.c, ts.basis.s, lam)
    G = psum(np.abs(ts.gamma) ** 2)
    D = T * G * T
    H = 4.0 / ts.K * (lam[:, None] * (Sbar.T @ (D[:, None] * Sbar)) * lam[None, :])
    return 0.5 * (H + H.T)


def train_multi(
    ts,
    rho,
    init=None,
    max_iter=100,
    gtol=1e-10,
    xtol=1e-10,
    armijo=1e-4,
    max_halvings=20,
):
    """Damped Gauss-Newton minimization of the risk over ``J`` parameters.

    Each step solves ``(H + mu I) delta = -g``; ``mu`` follows the gain
    ratio, and a backtracking Armijo search guarantees descent. Iterates are
    mapped through ``abs`` (filters depend on ``lam**2``).

    Raises
    ------
    StallNoDescent
        If backtracking fails while the predicted decrease is still
        significant; the exception carries the last iterate.
    """
    J = ts.basis.J
    lam = np.full(J, GN_INIT) if init is None else np.abs(np.asarray(init, dtype=float))
    if lam.shape != (J,):
        raise ShapeMismatch(f"init has shape {lam.shape}, expected ({J},)")
    state = gn_assemble(ts, lam, rho)
    f = state.risk
    history = [f]
    mu = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g, H = state.g, state.H
        if np.linalg.norm(g) <= gtol * (1.0 + abs(f)):
            converged = True
            it -= 1
            break
        hmax = max(float(np.max(np.diag(H))), 0.0)
        if mu is None:
            mu = 1e-6 * hmax if hmax > 0 else 1e-12
        mu = max(mu, 1e-14 * hmax, 1e-300)
        accepted = False
        for _ in range(MAX_DAMPING_RAISES + 1):
            delta = np.linalg.solve(H + mu * np.eye(J), -g)
            slope = float(g @ delta)
            if slope >= 0:
                # damping too weak for an indefinite surrogate; fall back to steepest descent
                delta = -g / max(hmax, mu, 1e-300)
                slope = float(g @ delta)
            alpha = 1.0
            for _ in range(max_halvings + 1):
                trial = np.abs(lam + alpha * delta)
                ft = empirical_risk(ts, trial, rho)
                if ft <= f + armijo * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted:
                break
            # a near-singular surrogate gives huge steps; damp until the step is
            # comparable to the iterate and try again
            mu = max(10.0 * mu, np.linalg.norm(g) / max(np.linalg.norm(lam), 1e-12))
        if not accepted:
            if abs(slope) <= 1e-14 * (1.0 + abs(f)):
                converged = True
                break
            raise StallNoDescent(
                f"no descent after {max_halvings} halvings at lambda={lam.tolist()}", lam=lam
            )
        pred = -(alpha * slope + 0.5 * alpha**2 * float(delta @ H @ delta))
        gain = (f - ft) / pred if pred > 0 else 0.0
        if gain > 0.75 and alpha == 1.0:
            mu /= 3.0
        elif gain < 0.25:
            mu *= 2.0
        step = np.linalg.norm(trial - lam)
        lam, f = trial, ft
        history.append(f)
        if step <= xtol * max(np.linalg.norm(lam), 1e-300):
            converged = True
            break
        state = gn_assemble(ts, lam, rho)
    return TrainResult(lam, f, it, converged, history)
