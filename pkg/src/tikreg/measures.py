"""Error measures rho used as the risk integrand.

All methods act on the last axis, so a ``(K, n)`` array of error vectors gives
``K`` values (``value``) or ``(K, n)`` derivatives.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["ErrorMeasure", "sq2norm", "pnorm", "huber", "parse_measure"]

HUBER_BETA = 1e-4
PNORM_HESS_FLOOR = 1e-8


@dataclass(frozen=True)
class ErrorMeasure:
    """``kind`` is one of ``"sq2norm"``, ``"pnorm"``, ``"huber"``.

    * sq2norm: ``0.5 * ||xi||^2``
    * pnorm:   ``sum |xi_i|^p`` (``p >= 1``)
    * huber:   ``sum h(xi_i)`` with ``h = |t| - beta/2`` for ``|t| >= beta`` and
      ``t^2 / (2 beta)`` otherwise.
    """

    kind: str
    p: float = 2.0
    beta: float = HUBER_BETA

    def __post_init__(self):
        if self.kind not in ("sq2norm", "pnorm", "huber"):
            raise ConfigError(f"unknown error measure {self.kind!r}")
        if self.kind == "pnorm" and not self.p >= 1:
            raise ConfigError(f"pnorm requires p >= 1, got {self.p}")
        if self.kind == "huber" and not self.beta > 0:
            raise ConfigError(f"huber requires beta > 0, got {self.beta}")

    @property
    def differentiable(self):
        return not (self.kind == "pnorm" and self.p == 1)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "sq2norm":
            return 0.5 * np.sum(xi * xi, axis=-1)
        a = np.abs(xi)
        if self.kind == "pnorm":
            return np.sum(a**self.p, axis=-1)
        b = self.beta
        return np.sum(np.where(a >= b, a - 0.5 * b, xi * xi / (2 * b)), axis=-1)

    __call__ = value

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "sq2norm":
            return xi.copy()
        a = np.abs(xi)
        if self.kind == "pnorm":
            return self.p * a ** (self.p - 1) * np.sign(xi)
        return np.where(a >= self.beta, np.sign(xi), xi / self.beta)

    def hessian_diag(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "sq2norm":
            return np.ones_like(xi)
        a = np.abs(xi)
        if self.kind == "pnorm":
            p = self.p
            if p < 2:
                a = np.maximum(a, PNORM_HESS_FLOOR)
            return p * (p - 1) * a ** (p - 2)
        # kink |xi| = beta belongs to the quadratic branch
        return np.where(a <= self.beta, 1.0 / self.beta, 0.0)

    def to_json(self):
        d = {"kind": self.kind}
        if self.kind == "pnorm":
            d["p"] = float(self.p)
        elif self.kind == "huber":
            d["beta"] = float(self.beta)
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        allowed = {"sq2norm": set(), "pnorm": {"p"}, "huber": {"beta"}}
        if kind not in allowed:
            raise ConfigError(f"rho.kind must be one of {sorted(allowed)}, got {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ConfigError(f"rho: unexpected keys {sorted(extra)} for kind {kind!r}")
        return cls(kind, **{k: float(v) for k, v in d.items()})


def sq2norm():
    return ErrorMeasure("sq2norm")


def pnorm(p):
    return ErrorMeasure("pnorm", p=float(p))


def huber(beta=HUBER_BETA):
    return ErrorMeasure("huber", beta=float(beta))


def parse_measure(text):
    """Parse ``"sq2norm"``, ``"pnorm:5"`` or ``"huber[:beta]"``."""
    name, _, arg = text.partition(":")
    try:
        if name == "sq2norm" and not arg:
            return sq2norm()
        if name == "pnorm" and arg:
            return pnorm(float(arg))
        if name == "huber":
            return huber(float(arg)) if arg else huber()
    except ValueError as exc:
        raise ConfigError(f"bad error measure {text!r}: {exc}") from exc
    raise ConfigError(f"bad error measure {text!r}")
