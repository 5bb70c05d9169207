"""Per-problem parameter choice: discrepancy principle, GCV and an MSE oracle.

All rules work on the spectral coefficients of a single observation, so one
decomposition serves any number of evaluations.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, FlatObjective, NoRoot, ShapeMismatch
from .filters import GsvdBasis, SpectralBasis, coefficients, tikhonov_filter_factors
from .gsvd import GsvdFactors
from .learn import golden_section

__all__ = [
    "DpConfig",
    "SelectionResult",
    "as_basis",
    "residual_norm_sq",
    "residual_limits",
    "select_dp",
    "gcv_value",
    "select_gcv",
    "gcv_value_multi",
    "select_gcv_multi",
    "select_mse_oracle",
    "search_interval",
]

N_GRID = 200
MULTI_STARTS = (1e-3, 1e-1, 1e1)


def as_basis(obj):
    """Accept GSVD factors, a spectral operator or a basis."""
    if isinstance(obj, SpectralBasis):
        return obj
    if isinstance(obj, GsvdFactors):
        return GsvdBasis(obj)
    if hasattr(obj, "basis"):
        return obj.basis()
    raise TypeError(f"cannot build a spectral basis from {type(obj).__name__}")


def search_interval(basis, lo=1e-8, hi=1e4):
    """``[lo, hi]`` scaled by the largest finite ratio ``|c_i| / |s_i|``."""
    s = basis.scale
    return lo * s, hi * s


@dataclass(frozen=True)
class DpConfig:
    """Discrepancy principle settings.

    ``eta`` estimates ``E ||noise||^2``; when omitted it is ``m * sigma2``.
    """

    tau: float = 1.0
    eta: Optional[float] = None
    sigma2: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.eta is not None and self.eta < 0:
            raise ConfigError(f"eta must be non-negative, got {self.eta}")

    def resolve_eta(self, m):
        if self.eta is not None:
            return float(self.eta)
        if self.sigma2 is not None:
            return float(m * self.sigma2)
        raise ConfigError("discrepancy principle needs eta or a noise variance sigma2")


@dataclass(frozen=True)
class SelectionResult:
    method: str
    lam: np.ndarray
    objective_value: float

    def to_json(self):
        return {
            "method": self.method,
            "lambda": [float(v) for v in self.lam],
            "objective_value": float(self.objective_value),
        }


def _single(b):
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ShapeMismatch(f"expected one observation vector, got shape {b.shape}")
    return b


def _residual(basis, coeffs, lam):
    phi = tikhonov_filter_factors(basis.c, basis.s, lam)
    return float(np.sum((1 - phi) ** 2 * np.abs(coeffs.proj) ** 2) + coeffs.tail_energy)


def residual_norm_sq(f, b, lam):
    """``||A x_lam - b||^2`` from the spectral coefficients."""
    basis = as_basis(f)
    lam = np.atleast_1d(lam)
    return _residual(basis, coefficients(basis, _single(b)), lam)


def residual_limits(f, b):
    """Residual at ``lam = 0`` and its limit as ``lam -> inf``."""
    basis = as_basis(f)
    co = coefficients(basis, _single(b))
    p2 = np.abs(co.proj) ** 2
    c0 = np.abs(basis.c) == 0
    penalized = np.any(basis.s > 0, axis=1)
    r0 = float(np.sum(p2[c0]) + co.tail_energy)
    rinf = float(np.sum(p2[penalized | c0]) + co.tail_energy)
    return r0, rinf


def select_dp(f, b, cfg, max_iter=200, rtol=1e-12):
    """Discrepancy principle: ``||A x_lam - b||^2 = tau * eta`` by bisection in log lambda."""
    basis = as_basis(f)
    if basis.J != 1:
        raise ShapeMismatch("the discrepancy principle is implemented for one parameter")
    b = _single(b)
    co = coefficients(basis, b)
    target = cfg.tau * cfg.resolve_eta(basis.m)
    r0, rinf = residual_limits(basis, b)
    if not r0 < target < rinf:
        raise NoRoot(
            f"tau*eta = {target:.6e} outside attainable residual range ({r0:.6e}, {rinf:.6e})",
            interval=(r0, rinf),
        )

    def r(l):
        return _residual(basis, co, [l])

    lo, hi = search_interval(basis)
    for _ in range(60):
        if r(lo) < target:
            break
        lo /= 10.0
    for _ in range(60):
        if r(hi) > target:
            break
        hi *= 10.0
    lam = np.sqrt(lo * hi)
    for _ in range(max_iter):
        lam = np.sqrt(lo * hi)
        val = r(lam)
        if abs(val - target) <= rtol * target:
            break
        if val > target:
            hi = lam
        else:
            lo = lam
    return SelectionResult("dp", np.array([lam]), r(lam))


def _gcv(basis, coeffs, lam):
    phi = tikhonov_filter_factors(basis.c, basis.s, lam)
    num = np.sum((1 - phi) ** 2 * np.abs(coeffs.proj) ** 2) + coeffs.tail_energy
    den = (basis.m - basis.n + np.sum(1 - phi)) ** 2
    if den <= 0:
        return np.inf
    return float(num / den)


def gcv_value(f, b, lam):
    """GCV function of one-parameter general-form Tikhonov (includes the m - n tail)."""
    basis = as_basis(f)
    return _gcv(basis, coefficients(basis, _single(b)), np.atleast_1d(lam))


def gcv_value_multi(op, b, lam):
    """GCV function for multi-parameter Tikhonov on a diagonalized operator family."""
    basis = as_basis(op)
    return _gcv(basis, coefficients(basis, _single(b)), np.atleast_1d(lam))


def _scan_then_golden(fun, lo, hi, n_grid, rel_width, flat_warn=False):
    grid = np.logspace(np.log10(lo), np.log10(hi), n_grid)
    vals = np.array([fun(l) for l in grid])
    finite = np.isfinite(vals)
    if flat_warn and finite.any():
        v = vals[finite]
        if np.max(v) - np.min(v) < 1e-14 * max(np.max(np.abs(v)), 1e-300):
            warnings.warn("objective is flat over the search interval", FlatObjective, stacklevel=3)
            mid = grid[n_grid // 2]
            return float(mid), float(fun(mid))
    i = int(np.argmin(np.where(finite, vals, np.inf)))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    lam, val, _ = golden_section(fun, a, b, rel_width)
    if vals[i] < val:
        return float(grid[i]), float(vals[i])
    return lam, float(val)


def select_gcv(f, b, rel_width=1e-6):
    """GCV parameter: 200-point log grid, then golden-section refinement."""
    basis = as_basis(f)
    co = coefficients(basis, _single(b))
    lo, hi = search_interval(basis)
    lam, val = _scan_then_golden(
        lambda l: _gcv(basis, co, [l]), lo, hi, N_GRID, rel_width, flat_warn=True
    )
    return SelectionResult("gcv", np.array([lam]), val)


def select_gcv_multi(op, b, starts=MULTI_STARTS, n_scan=41, rel_width=1e-6, max_sweeps=100):
    """Minimize the multi-parameter GCV function by cyclic coordinate search.

    Each coordinate update scans ``n_scan`` log-spaced values and refines the
    best bracket by golden-section. Sweeps repeat until the objective improves
    by less than 1e-10 (relative); the best of the multi-start runs is kept.
    """
    basis = as_basis(op)
    co = coefficients(basis, _single(b))
    J = basis.J
    lo, hi = search_interval(basis)
    best = None
    for start in starts:
        lam = np.full(J, float(start))
        val = _gcv(basis, co, lam)
        for _ in range(max_sweeps):
            prev = val
            for j in range(J):

                def fj(l, j=j):
                    trial = lam.copy()
                    trial[j] = l
                    return _gcv(basis, co, trial)

                lj, vj = _scan_then_golden(fj, lo, hi, n_scan, rel_width)
                if vj <= val:
                    lam[j], val = lj, vj
            if prev - val <= 1e-10 * abs(prev):
                break
        if best is None or val < best[1]:
            best = (lam.copy(), val)
    return SelectionResult("gcv-multi", best[0], best[1])


def select_mse_oracle(f, b, x_true, rel_width=1e-8):
    """Parameter minimizing ``||x_lam - x_true||^2`` (needs the true solution)."""
    basis = as_basis(f)
    if basis.J != 1:
        raise ShapeMismatch("the MSE oracle is implemented for one parameter")
    co = coefficients(basis, _single(b))
    x_true = np.asarray(x_true, dtype=float)

    def err(l):
        phi = tikhonov_filter_factors(basis.c, basis.s, [l])
        x = basis.synthesize(phi * co.gamma)
        return float(np.sum((x - x_true) ** 2))

    lo, hi = search_interval(basis)
    lam, val = _scan_then_golden(err, lo, hi, N_GRID, rel_width)
    return SelectionResult("mse-oracle", np.array([lam]), val)
