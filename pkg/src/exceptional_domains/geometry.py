"""Coordinates straightening the perturbed cylinder exterior.

The domain ``{(z, t) : |z| > 1 + phi(2 pi t / T)}`` in ``R^{n-1} x R`` is
parametrized over the fixed exterior ``{|y| >= 1} x R`` by

    (y, tau) -> (kappa(|y|^2, phi(tau)) y, T tau / (2 pi)),    kappa(a, b) = 1 + b/a,

whose inverse in the radial variable is ``y = zeta(|z|^2, b) z`` with
``zeta(a, b) = 1/2 + sqrt(1/4 - b/a)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import check_dimension
from .errors import DomainError, SingularityError

__all__ = [
    "DomainSpec",
    "Perturbation",
    "ZetaDerivatives",
    "boundary_normal",
    "forward_map",
    "inverse_map",
    "kappa",
    "zeta",
    "zeta_derivatives",
]

DERIVATIVE_GUARD = 1e6


@dataclass(frozen=True)
class Perturbation:
    """Even, 2 pi-periodic boundary profile ``phi(tau) = sum_j c_j cos(j tau)``."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.coeffs))
        if not c:
            c = (0.0,)
        if not all(math.isfinite(v) for v in c):
            raise DomainError("perturbation coefficients must be finite")
        object.__setattr__(self, "coeffs", c)
        sup = self.sup_norm()
        if not sup < 1.0:
            raise DomainError(f"perturbation needs sup|phi| < 1, sampled sup is {sup:.6g}")

    @classmethod
    def zero(cls):
        return cls((0.0,))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs)

    def __call__(self, tau, derivative: int = 0):
        """Evaluate ``phi`` or its ``derivative``-th derivative by direct summation."""
        tau = np.asarray(tau, dtype=float)
        j = np.arange(len(self.coeffs))
        arg = np.multiply.outer(tau, j)
        # d^m/dtau^m cos(j tau) = j^m cos(j tau + m pi/2)
        out = (self.array * j**derivative * np.cos(arg + 0.5 * math.pi * derivative)).sum(axis=-1)
        return float(out) if out.ndim == 0 else out

    def derivative(self, tau, order: int = 1):
        return self(tau, derivative=order)

    def sup_norm(self) -> float:
        samples = 8 * self.order + 16
        tau = np.linspace(0.0, math.pi, samples)
        j = np.arange(len(self.coeffs))
        return float(np.max(np.abs(np.cos(np.outer(tau, j)) @ np.asarray(self.coeffs))))

    def is_zero(self) -> bool:
        return not any(self.coeffs)


@dataclass(frozen=True)
class DomainSpec:
    """Dimension ``n``, period ``T`` and boundary profile ``phi``."""

    n: int
    t_period: float
    phi: Perturbation = field(default_factory=Perturbation.zero)

    def __post_init__(self):
        object.__setattr__(self, "n", check_dimension(self.n))
        if not (self.t_period > 0 and math.isfinite(self.t_period)):
            raise DomainError(f"period T must be positive, got {self.t_period!r}")
        object.__setattr__(self, "t_period", float(self.t_period))
        if not isinstance(self.phi, Perturbation):
            object.__setattr__(self, "phi", Perturbation(tuple(self.phi)))

    @property
    def omega(self) -> float:
        """Angular scale ``2 pi / T``."""
        return 2.0 * math.pi / self.t_period

    def with_phi(self, phi) -> "DomainSpec":
        return DomainSpec(self.n, self.t_period, phi if isinstance(phi, Perturbation) else Perturbation(tuple(phi)))

    def to_dict(self) -> dict:
        return {"n": self.n, "T": self.t_period, "phi": list(self.phi.coeffs)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        missing = {"n", "T"} - set(d)
        if missing:
            raise DomainError(f"DomainSpec JSON missing field(s): {sorted(missing)}")
        return cls(int(d["n"]), float(d["T"]), Perturbation(tuple(d.get("phi", [0.0]))))

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# kappa / zeta


def kappa(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 1) or np.any(np.abs(b) > 1):
        raise DomainError("kappa(a, b) is defined for a >= 1 and |b| <= 1")
    out = 1.0 + b / a
    return float(out) if out.ndim == 0 else out


def _zeta_root(a, b):
    """``sqrt(1/4 - b/a)``; written as ``sqrt((a - 4b)/(4a))`` for ``b < 0``."""
    return np.where(b < 0, np.sqrt(np.abs(a - 4.0 * b) / (4.0 * a)), np.sqrt(np.abs(0.25 - b / a)))


def _zeta_domain(a, b, strict):
    bad_b = np.abs(b) >= 1 if strict else np.abs(b) > 1
    bad_a = a <= 4.0 * b if strict else a < 4.0 * b
    return bad_b, bad_a


def zeta(a, b):
    """``zeta(a, b) = 1/2 + sqrt(1/4 - b/a)`` for ``|b| <= 1`` and ``a >= 4 b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bad_b, bad_a = _zeta_domain(a, b, strict=False)
    if np.any(bad_b) or np.any(bad_a) or np.any(a <= 0):
        raise DomainError("zeta(a, b) needs |b| <= 1, a > 0 and a >= 4b")
    out = 0.5 + _zeta_root(a, b)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ZetaDerivatives:
    z1: np.ndarray
    z11: np.ndarray
    z2: np.ndarray
    z22: np.ndarray


def zeta_derivatives(a, b, guard: float = DERIVATIVE_GUARD) -> ZetaDerivatives:
    """First and second partials of ``zeta`` in ``a`` and in ``b``.

    Raises :class:`SingularityError` when ``a <= 4 b`` or when any partial
    exceeds ``guard`` in magnitude (``zeta - 1/2`` too close to zero).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bad_b, bad_a = _zeta_domain(a, b, strict=True)
    if np.any(bad_b) or np.any(bad_a) or np.any(a <= 0):
        raise SingularityError("zeta derivatives need |b| < 1 and a > 4b")
    s = _zeta_root(a, b)  # zeta - 1/2
    z1 = b / (2.0 * a**2 * s)
    z11 = -b / (a**3 * s) * (1.0 + b / (4.0 * a * s**2))
    z2 = -1.0 / (2.0 * a * s)
    z22 = -1.0 / (4.0 * a**2 * s**3)
    worst = max(float(np.max(np.abs(v))) for v in (z1, z11, z2, z22))
    if not worst <= guard:
        raise SingularityError(f"zeta derivatives exceed guard {guard:g} (max {worst:.3g})")
    return ZetaDerivatives(z1, z11, z2, z22)


# --------------------------------------------------------------------------
# the diffeomorphism and the boundary


def forward_map(spec: DomainSpec, y, tau):
    """Map ``(y, tau)`` with ``|y| >= 1`` to ``(z, t)`` in the physical domain.

    ``y`` has trailing dimension ``n - 1``; returns ``(z, t)``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.n - 1:
        raise DomainError(f"y must have trailing dimension n-1={spec.n - 1}")
    r2 = np.sum(y * y, axis=-1)
    if np.any(r2 < 1.0 - 1e-14):
        raise DomainError("forward_map needs |y| >= 1")
    b = spec.phi(tau)
    k = 1.0 + b / r2
    z = np.asarray(k)[..., None] * y
    t = spec.t_period * np.asarray(tau, dtype=float) / (2.0 * math.pi)
    return z, t


def inverse_map(spec: DomainSpec, z, t):
    """Inverse of :func:`forward_map`: ``(z, t) -> (zeta(|z|^2, phi) z, 2 pi t / T)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.n - 1:
        raise DomainError(f"z must have trailing dimension n-1={spec.n - 1}")
    tau = 2.0 * math.pi * np.asarray(t, dtype=float) / spec.t_period
    b = np.asarray(spec.phi(tau))
    rz = np.sqrt(np.sum(z * z, axis=-1))
    if np.any(rz < (1.0 + b) * (1.0 - 1e-14)):
        raise DomainError("inverse_map: point lies inside the cylinder |z| < 1 + phi")
    y = np.asarray(zeta(rz**2, b))[..., None] * z
    return y, tau


def boundary_normal(spec: DomainSpec, sigma, tau):
    """Outer unit normal at the boundary point ``((1 + phi(tau)) sigma, T tau / 2 pi)``.

    Returns an array with trailing dimension ``n``: ``(-sigma, w phi') / sqrt(1 + w^2 phi'^2)``
    where ``w = 2 pi / T``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1] != spec.n - 1:
        raise DomainError(f"sigma must have trailing dimension n-1={spec.n - 1}")
    dphi = np.asarray(spec.phi(tau, derivative=1))
    w = spec.omega
    norm = np.sqrt(1.0 + (w * dphi) ** 2)
    out = np.concatenate([-sigma, (w * dphi)[..., None] * np.ones(sigma.shape[:-1] + (1,))], axis=-1)
    return out / norm[..., None]
