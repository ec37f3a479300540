r"""Modified Bessel functions of the second kind, :math:`K_\nu(x)`, for real
:math:`\nu \ge 0` and :math:`x > 0`.

Three evaluation routes are provided:

* ``quadrature`` -- composite Gauss-Legendre integration of

  .. math:: K_\nu(x) = \int_0^\infty e^{-x\cosh t}\cosh(\nu t)\,dt,

* ``half_integer_closed_form`` -- the terminating series for
  :math:`\nu = n + 1/2`,
* ``recurrence`` -- upward recurrence
  :math:`K_{\mu+1} = K_{\mu-1} + (2\mu/x) K_\mu` seeded by quadrature.

Internally everything is computed in the exponentially scaled form
:math:`e^{x} K_\nu(x)`, so ratios and logarithmic derivatives never underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError

__all__ = [
    "BesselMethod",
    "BesselEval",
    "bessel_k",
    "bessel_k_scaled",
    "bessel_k_quadrature",
    "bessel_k_ratio",
    "bessel_k_log_derivative",
    "canonical_order",
    "is_half_integer",
]

#: Arguments above this are returned in scaled form, ``e^x K_nu(x)``.
SCALE_THRESHOLD = 700.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_QUAD_RTOL = 1e-14
_MAX_PANELS = 4096
# e^{-40} ~ 4e-18: integrand below this fraction of its peak is dropped
_TAIL_DROP = 40.0


class BesselMethod(str, Enum):
    QUADRATURE = "quadrature"
    HALF_INTEGER = "half_integer_closed_form"
    RECURRENCE = "recurrence"


@dataclass(frozen=True)
class BesselEval:
    """Result of a :func:`bessel_k` evaluation.

    ``value`` is :math:`K_\\nu(x)` unless ``scaled`` is true, in which case it
    is :math:`e^{x}K_\\nu(x)` (used for ``x > 700`` where ``e^{-x}``
    underflows).
    """

    value: float
    method: BesselMethod
    est_abs_error: float
    scaled: bool = False


def canonical_order(n: int) -> float:
    """Bessel order ``(n - 3) / 2`` attached to the ambient dimension ``n``."""
    return 0.5 * (n - 3)


def is_half_integer(nu: float) -> bool:
    return _half_index(nu) is not None


def _half_index(nu):
    """Return ``m`` if ``nu == m + 1/2`` for an integer ``m >= 0``."""
    twice = 2.0 * nu
    if twice == round(twice) and int(round(twice)) % 2 == 1:
        return (int(round(twice)) - 1) // 2
    return None


def _int_index(nu):
    if nu == round(nu):
        return int(round(nu))
    return None


def _check(nu, x):
    if not nu >= 0:
        raise DomainError(f"Bessel order must be >= 0, got nu={nu!r}")
    if not x > 0:
        raise DomainError(f"K_nu(x) requires x > 0, got x={x!r}")


# --------------------------------------------------------------------------
# quadrature route


def _log_integrand(t, nu, x):
    # log of e^{-x(cosh t - 1)} e^{nu t}; cosh t - 1 = 2 sinh^2(t/2)
    return -2.0 * x * np.sinh(0.5 * t) ** 2 + nu * t


def _cutoff(nu, x):
    t_peak = math.asinh(nu / x)
    f_peak = _log_integrand(t_peak, nu, x)
    target = f_peak - _TAIL_DROP

    def g(t):
        return _log_integrand(t, nu, x) - target

    hi = t_peak + 1.0
    while g(hi) > 0:
        hi = t_peak + 2.0 * (hi - t_peak)
    return brentq(g, t_peak, hi, xtol=1e-12)


def _composite(nu, x, t_max, panels):
    edges = np.linspace(0.0, t_max, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    # e^{-x(cosh t-1)} cosh(nu t) without overflowing e^{nu t}
    vals = np.exp(_log_integrand(t, nu, x)) * 0.5 * (1.0 + np.exp(-2.0 * nu * t))
    return float(np.dot(w, vals))


def bessel_k_quadrature(nu: float, x: float) -> tuple[float, float]:
    """Scaled value ``e^x K_nu(x)`` by quadrature, with an error estimate.

    Panels are doubled until two successive composite rules agree to a
    relative ``1e-14``.
    """
    _check(nu, x)
    t_max = _cutoff(nu, x)
    panels = 4
    prev = _composite(nu, x, t_max, panels)
    while panels < _MAX_PANELS:
        panels *= 2
        cur = _composite(nu, x, t_max, panels)
        err = abs(cur - prev)
        if err <= _QUAD_RTOL * abs(cur):
            return cur, err
        prev = cur
    raise NumericalError(
        "quadrature for K_nu did not converge",
        nu=nu, x=x, panels=panels, last_change=abs(cur - prev), value=cur,
    )


# --------------------------------------------------------------------------
# closed forms and recurrences (all scaled by e^x)


def _half_integer_scaled(m, x):
    # e^x K_{m+1/2}(x) = sqrt(pi/2x) sum_j (m+j)!/(j!(m-j)!) (2x)^{-j}
    # Horner in 1/(2x) from the top coefficient down
    s = 0.0
    for j in range(m, -1, -1):
        c = math.factorial(m + j) / (math.factorial(j) * math.factorial(m - j))
        s = s / (2.0 * x) + c
    return math.sqrt(math.pi / (2.0 * x)) * s


def _integer_scaled(m, x):
    k0, e0 = bessel_k_quadrature(0.0, x)
    if m == 0:
        return k0, e0
    k1, e1 = bessel_k_quadrature(1.0, x)
    if m == 1:
        return k1, e1
    rel = max(e0 / k0, e1 / k1)
    km, kc = k0, k1
    for mu in range(1, m):
        km, kc = kc, km + (2.0 * mu / x) * kc
    return kc, rel * kc


def bessel_k_scaled(nu: float, x: float) -> tuple[float, BesselMethod, float]:
    """Return ``(e^x K_nu(x), method, est_abs_error)``."""
    _check(nu, x)
    m = _half_index(nu)
    if m is not None:
        v = _half_integer_scaled(m, x)
        return v, BesselMethod.HALF_INTEGER, 4.0 * (m + 1) * np.finfo(float).eps * v
    m = _int_index(nu)
    if m is not None and m >= 2:
        v, e = _integer_scaled(m, x)
        return v, BesselMethod.RECURRENCE, e
    v, e = bessel_k_quadrature(nu, x)
    return v, BesselMethod.QUADRATURE, e


def bessel_k(nu: float, x: float, method: str | BesselMethod | None = None) -> BesselEval:
    """Evaluate :math:`K_\\nu(x)`.

    Parameters
    ----------
    nu : float
        Order, ``nu >= 0``.
    x : float
        Argument, ``x > 0``.
    method : {None, "quadrature"}
        ``None`` picks the fastest exact route (closed form for half-integer
        orders, recurrence for integer orders >= 2, quadrature otherwise).
        ``"quadrature"`` forces direct integration.

    Returns
    -------
    BesselEval
        ``scaled`` is set for ``x > 700``; the value is then ``e^x K_nu(x)``.
    """
    _check(nu, x)
    if method is not None and BesselMethod(method) is BesselMethod.QUADRATURE:
        v, err = bessel_k_quadrature(nu, x)
        used = BesselMethod.QUADRATURE
    elif method is None:
        v, used, err = bessel_k_scaled(nu, x)
    else:
        raise DomainError(f"method {method!r} can only be requested implicitly")
    if x > SCALE_THRESHOLD:
        return BesselEval(v, used, err, scaled=True)
    f = math.exp(-x)
    return BesselEval(v * f, used, err * f, scaled=False)


# --------------------------------------------------------------------------
# ratios


def _ratio_scalar(nu, x):
    m = _half_index(nu)
    if m is not None:
        r = 1.0 + 1.0 / x
        mu = 0.5
    else:
        base = nu - math.floor(nu)
        a, _ = bessel_k_quadrature(base, x)
        b, _ = bessel_k_quadrature(base + 1.0, x)
        r = b / a
        mu = base
    # K_{mu+2}/K_{mu+1} = K_mu/K_{mu+1} + 2(mu+1)/x, all terms positive
    while mu < nu - 0.25:
        r = 1.0 / r + 2.0 * (mu + 1.0) / x
        mu += 1.0
    return r


def _half_integer_ratio(m, x):
    r = 1.0 + 1.0 / x
    for j in range(m):
        r = 1.0 / r + (2.0 * j + 3.0) / x
    return r


def bessel_k_ratio(nu: float, x):
    """Return :math:`K_{\\nu+1}(x)/K_\\nu(x)`.

    Accepts scalar or array ``x``. Half-integer orders use the exact
    cancellation-free recurrence from :math:`K_{3/2}/K_{1/2} = 1 + 1/x`;
    other orders are seeded by quadrature at the fractional part of ``nu``.
    """
    if not nu >= 0:
        raise DomainError(f"Bessel order must be >= 0, got nu={nu!r}")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("bessel_k_ratio requires x > 0")
    m = _half_index(nu)
    if m is not None:
        out = _half_integer_ratio(m, xa)
    elif xa.ndim == 0:
        out = _ratio_scalar(nu, float(xa))
    else:
        out = np.array([_ratio_scalar(nu, float(v)) for v in xa.ravel()]).reshape(xa.shape)
    return float(out) if np.ndim(out) == 0 else out


def bessel_k_log_derivative(nu: float, x):
    """Return :math:`K'_\\nu(x)/K_\\nu(x) = \\nu/x - K_{\\nu+1}(x)/K_\\nu(x)`."""
    r = bessel_k_ratio(nu, x)
    return nu / np.asarray(x, dtype=float) - r if np.ndim(r) else nu / float(x) - r
