"""The Laplacian transported to the fixed exterior ``{|y| >= 1} x R``.

For functions radial in ``y`` the transported operator reads

    L w = zeta^2 (w_rr + (n-2)/r w_r) + w^2 w_tautau
          + c_rr r^2 w_rr + c_grad r w_r + c_mixed r w_rtau,     w = 2 pi / T,

where ``zeta`` and its partials are evaluated at ``((r + phi/r)^2, phi(tau))``.
Coefficients follow from the chain rule for ``u(z, t) = w(zeta(|z|^2, phi) z, w t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import ContractError, DomainError
from .geometry import DomainSpec, zeta, zeta_derivatives
from .grid import GridConfig, GridField, cosine_matrices, radial_matrices

__all__ = [
    "OperatorCoefficients",
    "analytic_kernel",
    "apply",
    "assemble",
    "chainrule_oracle",
    "coefficients_at",
    "pointwise_operator",
]


@dataclass(frozen=True)
class OperatorCoefficients:
    c_lap: np.ndarray
    c_tautau: float
    c_rr: np.ndarray
    c_grad: np.ndarray
    c_mixed: np.ndarray


def _coefficients(spec, r, tau, tau_rank_one_scale=1.0, mixed_scale=2.0):
    r = np.asarray(r, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(r < 1.0):
        raise DomainError("operator coefficients need r >= 1")
    n = spec.n
    w2 = spec.omega**2
    b = np.asarray(spec.phi(tau))
    dphi = np.asarray(spec.phi(tau, 1))
    ddphi = np.asarray(spec.phi(tau, 2))
    a = (r + b / r) ** 2
    z = np.asarray(zeta(a, b))
    d = zeta_derivatives(a, b)
    r2 = r * r
    c_rr = 4.0 * d.z1 / z + 4.0 * r2 * d.z1**2 / z**4 + tau_rank_one_scale * w2 * d.z2**2 * dphi**2 / z**2
    c_grad = 2.0 * (n + 1) * d.z1 / z + 4.0 * d.z11 * r2 / z**3 + w2 * (ddphi * d.z2 + dphi**2 * d.z22) / z
    c_mixed = mixed_scale * w2 * d.z2 * dphi / z
    shape = np.broadcast(r, tau).shape
    return OperatorCoefficients(
        c_lap=np.broadcast_to(z**2, shape),
        c_tautau=w2,
        c_rr=np.broadcast_to(c_rr, shape),
        c_grad=np.broadcast_to(c_grad, shape),
        c_mixed=np.broadcast_to(c_mixed, shape),
    )


def coefficients_at(spec: DomainSpec, r, tau) -> OperatorCoefficients:
    """Coefficients of ``L`` at ``(r, tau)`` (broadcasting).

    ``c_rr`` multiplies ``sum y_l y_k d^2w/dy_l dy_k``, ``c_grad`` multiplies
    ``y . grad_y w`` and ``c_mixed`` multiplies ``sum y_l d^2 w/dy_l dtau``.
    The mixed coefficient carries the factor 2 from the symmetric cross term
    of ``d^2/dt^2``, and the ``phi'^2`` part of ``c_rr`` enters with weight 1.
    """
    return _coefficients(spec, r, tau)


def pointwise_operator(coef: OperatorCoefficients, n, r, w_r, w_rr, w_tautau, w_rtau):
    """Evaluate ``L w`` from radial/angular derivatives of a ``y``-radial ``w``."""
    return (
        coef.c_lap * (w_rr + (n - 2) / r * w_r)
        + coef.c_tautau * w_tautau
        + coef.c_rr * r * r * w_rr
        + coef.c_grad * r * w_r
        + coef.c_mixed * r * w_rtau
    )


# --------------------------------------------------------------------------
# analytic kernel: the straight solution |z|^{3-n} pulled back


def analytic_kernel(spec: DomainSpec, r, tau):
    """``W = (r + phi/r)^{3-n}`` and its derivatives in closed form.

    Returns a dict with keys ``w, w_r, w_rr, w_tau, w_tautau, w_rtau``.
    """
    r = np.asarray(r, dtype=float)
    p = 3.0 - spec.n
    f, f1, f2 = (np.asarray(spec.phi(tau, m)) for m in (0, 1, 2))
    q = r + f / r
    q_r = 1.0 - f / r**2
    q_rr = 2.0 * f / r**3
    q_t = f1 / r
    q_tt = f2 / r
    q_rt = -f1 / r**2
    g1 = p * q ** (p - 1)
    g2 = p * (p - 1) * q ** (p - 2)
    return {
        "w": q**p,
        "w_r": g1 * q_r,
        "w_rr": g2 * q_r**2 + g1 * q_rr,
        "w_tau": g1 * q_t,
        "w_tautau": g2 * q_t**2 + g1 * q_tt,
        "w_rtau": g2 * q_r * q_t + g1 * q_rt,
    }


# --------------------------------------------------------------------------
# discrete operator


def _grid_coefficients(spec, config):
    R, Tau = np.meshgrid(config.r_nodes, config.tau_nodes, indexing="ij")
    c = coefficients_at(spec, R, Tau)
    R2 = R * R
    lap = c.c_lap / R2
    a_xixi = lap + c.c_rr
    a_xi = -a_xixi + (spec.n - 2) * lap + c.c_grad
    return a_xixi, a_xi, c.c_tautau, np.asarray(c.c_mixed)


def assemble(spec: DomainSpec, config: GridConfig) -> sps.csr_array:
    """Sparse matrix of the discrete ``L`` at every node, radial-major ordering.

    In ``xi = log r``: ``r^2 w_rr = w_xixi - w_xi``, ``r w_r = w_xi`` and
    ``r w_rtau = w_xitau``.
    """
    n_r, m = config.n_r, config.m_tau
    D1, D2 = radial_matrices(config)
    _, _, T1, T2 = cosine_matrices(m)
    a_xixi, a_xi, c_tt, c_mix = _grid_coefficients(spec, config)
    I_m = sps.identity(m, format="csr")
    I_r = sps.identity(n_r, format="csr")
    L = (
        sps.diags_array(a_xixi.ravel()) @ sps.kron(D2, I_m)
        + sps.diags_array(a_xi.ravel()) @ sps.kron(D1, I_m)
        + c_tt * sps.kron(I_r, sps.csr_array(T2))
    )
    if np.any(c_mix != 0.0):
        L = L + sps.diags_array(c_mix.ravel()) @ sps.kron(D1, sps.csr_array(T1))
    return sps.csr_array(L)


def apply(spec: DomainSpec, field: GridField) -> GridField:
    """Discrete image ``L w`` of a grid field at every node."""
    if field.spec is not None and field.spec != spec:
        raise ContractError("field was built for a different DomainSpec")
    L = assemble(spec, field.config)
    out = (L @ field.values.ravel()).reshape(field.values.shape)
    return GridField(out, field.config, spec)


# --------------------------------------------------------------------------
# chain-rule oracle

_D2_5 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1_5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_OFF = np.arange(-2, 3)


def _fd_derivatives(w, r, tau, h):
    wr = sum(c * w(r + o * h, tau) for c, o in zip(_D1_5, _OFF)) / h
    wrr = sum(c * w(r + o * h, tau) for c, o in zip(_D2_5, _OFF)) / h**2
    wtt = sum(c * w(r, tau + o * h) for c, o in zip(_D2_5, _OFF)) / h**2
    wrt = 0.0
    for ci, oi in zip(_D1_5, _OFF):
        for cj, oj in zip(_D1_5, _OFF):
            if ci and cj:
                wrt += ci * cj * w(r + oi * h, tau + oj * h)
    return wr, wrr, wtt, wrt / h**2


def chainrule_oracle(spec: DomainSpec, w_analytic, point, step: float = 1e-4):
    """Two independent evaluations of the transported Laplacian at ``point``.

    Parameters
    ----------
    w_analytic : callable ``(r, tau) -> float``
    point : ``(r, tau)`` with ``r > 1`` far enough from 1 for the stencils.

    Returns
    -------
    (operator_value, laplacian_value)
        ``operator_value`` applies :func:`coefficients_at` to finite-difference
        derivatives of ``w``; ``laplacian_value`` is the ``n``-dimensional
        Laplacian of ``u(z, t) = w(inverse_map(z, t))`` by finite differences in
        ``(z, t)`` at the image point.
    """
    r0, tau0 = (float(v) for v in point)
    if r0 - 2 * step <= 1.0:
        raise DomainError("oracle point too close to the boundary")
    n = spec.n
    wr, wrr, wtt, wrt = _fd_derivatives(w_analytic, r0, tau0, step)
    coef = coefficients_at(spec, r0, tau0)
    op = float(pointwise_operator(coef, n, r0, wr, wrr, wtt, wrt))

    phi = spec.phi
    scale = spec.omega

    def u(z, t):
        tau = scale * t
        b = phi(tau)
        rz = math.sqrt(float(np.dot(z, z)))
        return w_analytic(float(zeta(rz * rz, b)) * rz, tau)

    z0 = np.zeros(n - 1)
    z0[0] = r0 + phi(tau0) / r0
    t0 = tau0 / scale
    lap = 0.0
    for i in range(n - 1):
        e = np.zeros(n - 1)
        e[i] = step
        lap += sum(c * u(z0 + o * e, t0) for c, o in zip(_D2_5, _OFF)) / step**2
    lap += sum(c * u(z0, t0 + o * step) for c, o in zip(_D2_5, _OFF)) / step**2
    return op, lap
