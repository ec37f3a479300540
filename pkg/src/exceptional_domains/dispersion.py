"""Dispersion function and spectrum of the linearized overdetermined map.

For the straight cylinder exterior in dimension ``n`` the linearization of
the Neumann defect acts diagonally on ``cos(k tau)`` with eigenvalue

    lambda_k(T) = -(n - 3) * Lambda(2 pi k / T),
    Lambda(rho) = n - 2 - rho K_{nu+1}(rho) / K_nu(rho),   nu = (n - 3) / 2,

and ``Lambda(0) = 1``. The bifurcation period is ``T* = 2 pi / rho*`` where
``rho*`` is the unique positive zero of ``Lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .special_functions import bessel_k_ratio, canonical_order

__all__ = [
    "CriticalPoint",
    "DispersionTable",
    "capital_lambda",
    "capital_lambda_derivative",
    "check_dimension",
    "critical_rho",
    "eigenvalue",
    "eigenvalue_derivative",
    "eigenvalue_table",
]


def check_dimension(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 4:
        raise DomainError(f"dimension must be an integer >= 4, got n={n!r}")
    return int(n)


def capital_lambda(n: int, rho):
    """``Lambda(rho)`` for scalar or array ``rho >= 0``; exactly 1 at 0."""
    n = check_dimension(n)
    nu = canonical_order(n)
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("capital_lambda needs rho >= 0")
    out = np.ones_like(r)
    pos = r > 0
    if np.any(pos):
        out[pos] = (n - 2) - r[pos] * bessel_k_ratio(nu, r[pos])
    return float(out) if out.ndim == 0 else out


def capital_lambda_derivative(n: int, rho):
    """``Lambda'(rho)`` for ``rho > 0`` from the Bessel derivative identities.

    With ``q = K_{nu+1}/K_nu``: ``-Lambda' = q (rho q - 2 nu) - rho``.
    """
    n = check_dimension(n)
    nu = canonical_order(n)
    r = np.asarray(rho, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("capital_lambda_derivative needs rho > 0")
    q = bessel_k_ratio(nu, r)
    d = -(q * (r * q - 2.0 * nu) - r)
    return float(d) if np.ndim(d) == 0 else d


def _check_period(t_period):
    if not t_period > 0 or not math.isfinite(t_period):
        raise DomainError(f"period T must be positive and finite, got T={t_period!r}")


def eigenvalue(n: int, t_period: float, k):
    """``lambda_k(T) = -(n-3) Lambda(2 pi k / T)``; ``-(n-3)`` at ``k = 0``."""
    n = check_dimension(n)
    _check_period(t_period)
    k = np.asarray(k)
    if np.any(k < 0):
        raise DomainError("mode index k must be >= 0")
    lam = -(n - 3) * np.asarray(capital_lambda(n, 2.0 * math.pi * k / t_period))
    return float(lam) if lam.ndim == 0 else lam


def eigenvalue_derivative(n: int, t_period: float, k: int) -> float:
    """``d lambda_k / dT`` by the chain rule on ``Lambda'`` (no differencing)."""
    n = check_dimension(n)
    _check_period(t_period)
    if k == 0:
        return 0.0
    rho = 2.0 * math.pi * k / t_period
    return (n - 3) * (rho / t_period) * capital_lambda_derivative(n, rho)


@dataclass(frozen=True)
class CriticalPoint:
    n: int
    rho_star: float
    t_star: float
    lambda1_slope: float
    lambda_residual: float


def critical_rho(n: int) -> CriticalPoint:
    """Locate the unique zero of ``Lambda`` inside ``(0, sqrt(n - 2))``.

    The slope ``d lambda_1/dT`` at ``T*`` uses the closed form
    ``-Lambda'(rho*) = (n-2)/rho* - rho*`` valid at a zero of ``Lambda``.
    """
    n = check_dimension(n)
    lo, hi = 1e-8, math.sqrt(n - 2) * (1.0 - 1e-12)
    f_lo, f_hi = capital_lambda(n, lo), capital_lambda(n, hi)
    if not (f_lo > 0 > f_hi):
        raise NumericalError(
            "Lambda is not bracketed on (1e-8, sqrt(n-2))", n=n, f_lo=f_lo, f_hi=f_hi
        )
    rho = brentq(lambda r: capital_lambda(n, r), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    resid = capital_lambda(n, rho)
    if abs(resid) >= 1e-13:
        raise NumericalError("root of Lambda not resolved to 1e-13", n=n, rho=rho, residual=resid)
    t_star = 2.0 * math.pi / rho
    dlam_drho = -((n - 2) / rho - rho)
    slope = (n - 3) * (rho / t_star) * dlam_drho
    return CriticalPoint(n=n, rho_star=rho, t_star=t_star, lambda1_slope=slope, lambda_residual=resid)


@dataclass(frozen=True)
class DispersionTable:
    n: int
    t_period: float
    k: np.ndarray
    rho: np.ndarray
    lambda_cap: np.ndarray
    lambda_k: np.ndarray

    @property
    def samples(self):
        return list(zip(self.rho.tolist(), self.lambda_cap.tolist()))

    def rows(self):
        for k, r, L, lam in zip(self.k, self.rho, self.lambda_cap, self.lambda_k):
            yield int(k), float(r), float(L), float(lam)

    def to_csv(self) -> str:
        lines = ["k,rho,Lambda,lambda_k"]
        lines += [f"{k},{r:.17g},{L:.17g},{lam:.17g}" for k, r, L, lam in self.rows()]
        return "\n".join(lines) + "\n"


def eigenvalue_table(n: int, t_period: float, k_max: int) -> DispersionTable:
    n = check_dimension(n)
    _check_period(t_period)
    if int(k_max) != k_max or k_max < 1:
        raise DomainError(f"k_max must be an integer >= 1, got {k_max!r}")
    k = np.arange(int(k_max) + 1)
    rho = 2.0 * math.pi * k / t_period
    lam_cap = np.asarray(capital_lambda(n, rho))
    lam = -(n - 3) * lam_cap
    return DispersionTable(n=n, t_period=float(t_period), k=k, rho=rho, lambda_cap=lam_cap, lambda_k=lam)
