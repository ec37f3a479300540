"""Dirichlet solves on the straightened exterior and the overdetermined map.

``solve_dirichlet`` discretizes ``L w = 0`` with ``w = 1`` at ``r = 1`` and a
mode-wise Dirichlet-to-Neumann closure at ``r = r_max``: each cosine mode of
the outer ring obeys the exact radial law of the straight cylinder,
``r d/dr w_k = r g_k(r) w_k`` with ``g_0 = (3 - n)/r`` and
``r g_k(r) = -rho_k r K_{nu+1}(rho_k r)/K_nu(rho_k r)``.

``boundary_flux`` turns a solution into the normal derivative on the
physical boundary, and hence into ``F(T, phi) = dw/d eta - (n - 3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spl

from .dispersion import check_dimension
from .errors import ContractError, DomainError, NumericalError
from .geometry import DomainSpec, Perturbation, zeta, zeta_derivatives
from .grid import GridConfig, GridField, cosine_matrices, radial_matrices
from .pullback import assemble
from .special_functions import bessel_k_ratio, bessel_k_scaled, canonical_order

__all__ = [
    "FluxTrace",
    "SolveResult",
    "boundary_flux",
    "boundary_gradient",
    "boundary_gradient_norm",
    "decay_slope",
    "dtn_factors",
    "solve_dirichlet",
    "solve_linearized",
    "straight_mode_flux",
    "straight_mode_solution",
    "weighted_sup_norm",
]

LINEAR_RTOL = 1e-10
MAX_PRINCIPLE_SLACK = 1e-8


# --------------------------------------------------------------------------
# straight cylinder: exact modes


def _rho(t_period, k):
    if not t_period > 0:
        raise DomainError(f"period T must be positive, got {t_period!r}")
    if int(k) != k or k < 0:
        raise DomainError(f"mode index must be a nonnegative integer, got {k!r}")
    return 2.0 * math.pi * k / t_period


def straight_mode_solution(n, t_period, k, r):
    """Decaying radial mode normalized to 1 at ``r = 1``.

    ``u_k(r) = r^{-nu} K_nu(rho_k r) / K_nu(rho_k)`` with ``rho_k = 2 pi k/T``
    and ``nu = (n - 3)/2``; ``u_0(r) = r^{3-n}``. Accepts scalar or array ``r``.
    """
    n = check_dimension(n)
    rho = _rho(t_period, k)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 1.0):
        raise DomainError("straight_mode_solution needs r >= 1")
    if k == 0:
        out = r_arr ** (3.0 - n)
    else:
        nu = canonical_order(n)
        k1, _, _ = bessel_k_scaled(nu, rho)
        vals = [bessel_k_scaled(nu, rho * float(x))[0] for x in r_arr.ravel()]
        kr = np.array(vals).reshape(r_arr.shape)
        # scaled values: K(x) = e^{-x} Ks(x)
        out = r_arr ** (-nu) * kr / k1 * np.exp(-rho * (r_arr - 1.0))
    return float(out) if np.ndim(out) == 0 else out


def straight_mode_flux(n, t_period, k) -> float:
    """``u_k'(1)``: ``3 - n`` for ``k = 0``, else ``-rho_k K_{nu+1}(rho_k)/K_nu(rho_k)``."""
    n = check_dimension(n)
    rho = _rho(t_period, k)
    if k == 0:
        return 3.0 - n
    return -rho * bessel_k_ratio(canonical_order(n), rho)


@dataclass(frozen=True)
class LinearizedSolution:
    """Mode superposition ``sum_k v_k u_k(r) cos(k tau)`` on the straight exterior."""

    n: int
    t_period: float
    coeffs: tuple

    def __call__(self, r, tau):
        r = np.asarray(r, dtype=float)
        tau = np.asarray(tau, dtype=float)
        out = np.zeros(np.broadcast(r, tau).shape)
        for k, c in enumerate(self.coeffs):
            if c:
                out = out + c * straight_mode_solution(self.n, self.t_period, k, r) * np.cos(k * tau)
        return out

    def radial_derivative_at_boundary(self, tau):
        tau = np.asarray(tau, dtype=float)
        return sum(c * straight_mode_flux(self.n, self.t_period, k) * np.cos(k * tau) for k, c in enumerate(self.coeffs))

    def on_grid(self, config: GridConfig) -> GridField:
        R, Tau = np.meshgrid(config.r_nodes, config.tau_nodes, indexing="ij")
        vals = np.zeros(R.shape)
        for k, c in enumerate(self.coeffs):
            if c:
                vals += c * np.multiply.outer(
                    straight_mode_solution(self.n, self.t_period, k, config.r_nodes), np.cos(k * config.tau_nodes)
                )
        return GridField(vals, config, DomainSpec(self.n, self.t_period))


def solve_linearized(n, t_period, v, config: GridConfig | None = None):
    """Harmonic extension of boundary data ``v = sum v_k cos(k tau)`` for ``phi = 0``.

    Built from exact modes, no linear solve. Returns a :class:`GridField` on
    ``config`` when given, else the callable :class:`LinearizedSolution`.
    """
    coeffs = tuple(float(c) for c in (v.coeffs if isinstance(v, Perturbation) else np.atleast_1d(v)))
    sol = LinearizedSolution(check_dimension(n), float(t_period), coeffs)
    return sol if config is None else sol.on_grid(config)


# --------------------------------------------------------------------------
# discrete Dirichlet problem


@dataclass
class SolveResult:
    field: GridField
    linear_residual: float
    iterations: int
    outer_radius: float
    spec: DomainSpec
    method: str = "splu"
    max_principle_ok: bool = True
    interior_range: tuple = (0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "grid": self.field.config.to_dict(),
            "linear_residual": self.linear_residual,
            "iterations": self.iterations,
            "outer_radius": self.outer_radius,
            "method": self.method,
            "max_principle_ok": self.max_principle_ok,
            "interior_range": list(self.interior_range),
        }


def dtn_factors(n, t_period, r_max, m_tau) -> np.ndarray:
    """``r g_k(r)`` at ``r = r_max`` for the cosine modes ``k = 0..m_tau-1``."""
    nu = canonical_order(n)
    k = np.arange(m_tau)
    rho = 2.0 * math.pi * k[1:] / t_period * r_max
    out = np.empty(m_tau)
    out[0] = 3.0 - n
    if len(rho):
        out[1:] = -rho * np.asarray(bessel_k_ratio(nu, rho))
    return out


def _system(spec, config):
    n_r, m = config.n_r, config.m_tau
    N = n_r * m
    L = assemble(spec, config)
    D1, _ = radial_matrices(config)
    C, E, _, _ = cosine_matrices(m)
    I_m = sps.identity(m, format="csr")
    # r = 1: Dirichlet rows
    top = sps.hstack([I_m, sps.csr_array((m, N - m))])
    # r = r_max: d/dxi w_k = (r g_k) w_k per mode, written in node values
    dtn = E @ np.diag(dtn_factors(spec.n, spec.t_period, config.r_max, m)) @ C
    bottom = sps.kron(D1[[n_r - 1], :], I_m) - sps.hstack([sps.csr_array((m, N - m)), sps.csr_array(dtn)])
    A = sps.vstack([top, L[m : N - m], bottom], format="csc")
    b = np.zeros(N)
    b[:m] = 1.0
    return A, b


def solve_dirichlet(spec: DomainSpec, grid_config: GridConfig | None = None, rtol: float = LINEAR_RTOL) -> SolveResult:
    """Solve ``L w = 0``, ``w(1, .) = 1``, with the outer DtN closure.

    Sparse LU first, one step of iterative refinement if needed, then
    Jacobi-preconditioned GMRES as a fallback.

    Raises
    ------
    NumericalError
        if the relative residual cannot be brought below ``rtol``.
    """
    config = grid_config or GridConfig()
    if config.r_max < 10:
        raise DomainError(f"r_max must be >= 10, got {config.r_max}")
    if config.n_r < 16 or config.m_tau < 16:
        raise DomainError("grid sizes n_r and m_tau must be >= 16")
    A, b = _system(spec, config)
    bnorm = np.max(np.abs(b))

    def rel(x):
        return float(np.max(np.abs(A @ x - b)) / bnorm)

    method, iters = "splu", 1
    x = None
    try:
        lu = spl.splu(A)
        x = lu.solve(b)
        res = rel(x)
        while res >= rtol and iters < 4:
            x = x + lu.solve(b - A @ x)
            iters += 1
            res = rel(x)
    except RuntimeError:
        res = math.inf
    if not res < rtol:
        method = "gmres"
        d = A.diagonal()
        d[d == 0] = 1.0
        M = sps.diags_array(1.0 / d)
        counter = {"it": 0}

        def cb(_):
            counter["it"] += 1

        x, _ = spl.gmres(A, b, x0=x, M=M, rtol=rtol * 1e-2, restart=200, maxiter=50, callback=cb)
        iters += counter["it"]
        res = rel(x)
        if not res < rtol:
            raise NumericalError("linear solve stagnated", residual=res, iterations=iters, grid=config.to_dict())
    vals = x.reshape(config.n_r, config.m_tau)
    interior = vals[1:]
    lo, hi = float(interior.min()), float(interior.max())
    ok = lo > -MAX_PRINCIPLE_SLACK and hi < 1.0 + MAX_PRINCIPLE_SLACK
    return SolveResult(
        field=GridField(vals, config, spec),
        linear_residual=res,
        iterations=iters,
        outer_radius=config.r_max,
        spec=spec,
        method=method,
        max_principle_ok=ok,
        interior_range=(lo, hi),
    )


# --------------------------------------------------------------------------
# boundary flux


@dataclass(frozen=True)
class FluxTrace:
    tau_nodes: np.ndarray
    flux_values: np.ndarray
    f_values: np.ndarray
    gradient_norm: np.ndarray = field(default=None, repr=False)

    def modes(self) -> np.ndarray:
        """Cosine coefficients of ``f_values``."""
        C, _, _, _ = cosine_matrices(len(self.tau_nodes))
        return C @ self.f_values

    def evaluate(self, tau, values=None) -> np.ndarray:
        """Cosine interpolant of ``values`` (default ``f_values``) at arbitrary ``tau``."""
        v = self.f_values if values is None else values
        C, _, _, _ = cosine_matrices(len(self.tau_nodes))
        c = C @ v
        return np.cos(np.multiply.outer(np.asarray(tau, dtype=float), np.arange(len(c)))) @ c

    def evenness_defect(self) -> float:
        t = self.tau_nodes
        return float(np.max(np.abs(self.evaluate(t) - self.evaluate(2.0 * math.pi - t))))


def _boundary_derivatives(result: SolveResult):
    cfg = result.field.config
    D1, _ = radial_matrices(cfg)
    _, _, T1, _ = cosine_matrices(cfg.m_tau)
    row = D1[[0], :].toarray().ravel()
    w_r = row @ result.field.values  # r = 1 so w_r = w_xi
    w_tau = T1 @ result.field.values[0]
    return w_r, w_tau


def boundary_gradient(spec: DomainSpec, tau, w_r, w_tau):
    """Physical gradient components ``(du/d|z|, du/dt)`` at boundary points.

    ``u(z, t) = w(zeta(|z|^2, phi)|z|, 2 pi t/T)`` differentiated by the chain
    rule at ``|z| = 1 + phi(tau)``.
    """
    om = spec.omega
    b = np.asarray(spec.phi(tau))
    dphi = np.asarray(spec.phi(tau, 1))
    rz = 1.0 + b
    a = rz * rz
    z = np.asarray(zeta(a, b))
    d = zeta_derivatives(a, b)
    du_drho = w_r * (z + 2.0 * a * d.z1)
    du_dt = om * (w_r * rz * d.z2 * dphi + w_tau)
    return du_drho, du_dt


def boundary_flux(spec: DomainSpec, result: SolveResult) -> FluxTrace:
    """Normal derivative of ``u`` along the outer normal ``(-sigma, w phi')/|.|`` at the nodes."""
    if result.spec != spec:
        raise ContractError("SolveResult was computed for a different DomainSpec")
    tau = result.field.tau_nodes
    w_r, w_tau = _boundary_derivatives(result)
    du_drho, du_dt = boundary_gradient(spec, tau, w_r, w_tau)
    om_dphi = spec.omega * np.asarray(spec.phi(tau, 1))
    flux = (-du_drho + om_dphi * du_dt) / np.sqrt(1.0 + om_dphi**2)
    grad = np.hypot(du_drho, du_dt)
    return FluxTrace(tau, flux, flux - (spec.n - 3), grad)


def boundary_gradient_norm(spec: DomainSpec, result: SolveResult, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """``|grad u|`` on ``samples`` uniformly spaced boundary angles in ``[0, pi]``.

    Boundary values of ``w_r`` and ``w_tau`` are carried off the nodes by
    their cosine interpolants.
    """
    w_r, w_tau = _boundary_derivatives(result)
    C, _, _, _ = cosine_matrices(result.field.config.m_tau)
    tau = np.linspace(0.0, math.pi, samples)
    Ev = np.cos(np.outer(tau, np.arange(result.field.config.m_tau)))
    du_drho, du_dt = boundary_gradient(spec, tau, Ev @ (C @ w_r), Ev @ (C @ w_tau))
    return tau, np.hypot(du_drho, du_dt)


def weighted_sup_norm(field: GridField, mu: float) -> float:
    """``sup_s s^{-mu} max_{s <= r <= 2s} |w|`` over dyadic shells ``s = 1, 2, 4, ... <= r_max/2``."""
    r = field.r_nodes
    vals = np.max(np.abs(field.values), axis=1)
    best = 0.0
    s = 1.0
    while s <= r[-1] / 2.0 * (1 + 1e-12):
        mask = (r >= s * (1 - 1e-12)) & (r <= 2.0 * s * (1 + 1e-12))
        if np.any(mask):
            best = max(best, s ** (-mu) * float(np.max(vals[mask])))
        s *= 2.0
    return best


def decay_slope(field: GridField, r_lo: float, r_hi: float) -> float:
    """Least-squares slope of ``log |tau-mean|`` against ``log r`` on ``[r_lo, r_hi]``."""
    r = field.r_nodes
    mask = (r >= r_lo) & (r <= r_hi)
    if mask.sum() < 2:
        raise DomainError("decay window holds fewer than two nodes")
    mean = np.abs(field.tau_mean()[mask])
    slope, _ = np.polyfit(np.log(r[mask]), np.log(mean), 1)
    return float(slope)
