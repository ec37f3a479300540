"""Linearized spectrum, bifurcation certificate and branch continuation.

The branch is sought as ``phi_s = s cos + s v_s`` with ``v_s`` orthogonal to
``cos`` (its mode-1 coefficient is held at zero). For each ``s`` the cosine
modes ``0..M`` of ``F(T, phi_s) / s`` are driven to zero by Newton's method
in the unknowns ``(T, v_0, v_2, ..., v_M)``: the mode-1 equation is balanced
by ``T`` instead of ``v_1``. Dividing by ``s`` keeps the Jacobian regular as
``s -> 0``, where it reduces to ``diag(lambda_k)`` with ``lambda_1'(T*)`` in
the ``T`` column.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import CriticalPoint, check_dimension, critical_rho, eigenvalue
from .errors import DomainError, NumericalError
from .geometry import DomainSpec, Perturbation
from .grid import GridConfig, GridField
from .pullback import apply
from .solver import (
    SolveResult,
    boundary_flux,
    boundary_gradient_norm,
    decay_slope,
    solve_dirichlet,
)

__all__ = [
    "BifurcationCertificate",
    "Branch",
    "BranchPoint",
    "LinearizedOperator",
    "TraceOptions",
    "VerificationReport",
    "find_bifurcation",
    "linearized_action",
    "trace_branch",
    "verify",
]

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# linearization


@dataclass(frozen=True)
class LinearizedOperator:
    """Diagonal action of the linearized map on cosine modes ``0..k_max``."""

    n: int
    t_period: float
    eigenvalues: np.ndarray

    @classmethod
    def build(cls, n, t_period, k_max):
        n = check_dimension(n)
        lam = np.asarray(eigenvalue(n, t_period, np.arange(k_max + 1)), dtype=float)
        return cls(n, float(t_period), lam)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if len(v) > len(self.eigenvalues):
            raise DomainError("coefficient vector longer than the tabulated spectrum")
        return self.eigenvalues[: len(v)] * v


def linearized_action(n, t_period, v) -> np.ndarray:
    """Multiply cosine coefficient ``k`` of ``v`` by ``lambda_k(T)``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return LinearizedOperator.build(n, t_period, len(v) - 1)(v)


@dataclass(frozen=True)
class BifurcationCertificate:
    critical: CriticalPoint
    kernel_mode: int
    lambda1_at_star: float
    min_abs_other: float
    other_modes_checked: tuple
    slope: float

    @property
    def t_star(self):
        return self.critical.t_star

    @property
    def rho_star(self):
        return self.critical.rho_star


def find_bifurcation(n, k_check: int = 50) -> BifurcationCertificate:
    """``T*`` with a certificate of a simple kernel ``span{cos}`` and transversality.

    Raises :class:`NumericalError` if ``lambda_1(T*)`` is not zero to 1e-12,
    some ``|lambda_k(T*)|`` with ``k != 1`` is below 1e-6, or the slope is not
    negative.
    """
    cp = critical_rho(n)
    lam1 = eigenvalue(n, cp.t_star, 1)
    others = (0,) + tuple(range(2, k_check + 1))
    lam = np.asarray(eigenvalue(n, cp.t_star, np.array(others)))
    min_other = float(np.min(np.abs(lam)))
    if not abs(lam1) < 1e-12:
        raise NumericalError("lambda_1(T*) is not zero", lambda1=lam1, n=n)
    if not min_other > 1e-6:
        raise NumericalError("kernel is not one-dimensional", min_abs_other=min_other, n=n)
    if not cp.lambda1_slope < 0:
        raise NumericalError("transversality fails", slope=cp.lambda1_slope, n=n)
    return BifurcationCertificate(cp, 1, float(lam1), min_other, others, cp.lambda1_slope)


# --------------------------------------------------------------------------
# branch


@dataclass
class BranchPoint:
    s: float
    t_period: float
    v_coeffs: tuple
    newton_residual: float
    iterations: int = 0
    solve: SolveResult | None = field(default=None, repr=False)
    flux_modes: tuple = field(default=(), repr=False)

    @property
    def phi(self) -> Perturbation:
        c = self.s * np.asarray(self.v_coeffs)
        c[1] += self.s
        return Perturbation(tuple(c))

    @property
    def n(self):
        return self.solve.spec.n if self.solve is not None else None

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "T": self.t_period,
            "v_coeffs": list(self.v_coeffs),
            "newton_residual": self.newton_residual,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class TraceOptions:
    modes: int = 8
    newton_tol: float = 1e-8
    max_newton: int = 30
    fd_step: float = 1e-6
    min_step_fraction: float = 1e-4
    decay_tol: float = 1e-6
    consistency_slack: float = 3.0
    polish: int = 1


@dataclass
class Branch:
    n: int
    points: list
    grid: GridConfig
    t_star: float
    modes: int
    aborted: bool = False
    message: str = ""
    consistency_constant: float | None = None
    consistency_violations: int = 0

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "T_star": self.t_star,
            "modes": self.modes,
            "grid": self.grid.to_dict(),
            "aborted": self.aborted,
            "message": self.message,
            "points": [p.to_dict() for p in self.points],
        }


class _FluxMap:
    """``x = (T, v_0, v_2, ..., v_M) -> modes 0..M of F(T, s cos + s v) / s``."""

    def __init__(self, n, grid, modes):
        self.n, self.grid, self.modes = n, grid, modes
        if grid.m_tau < modes + 1:
            raise DomainError(f"m_tau={grid.m_tau} cannot resolve {modes} branch modes")

    def coeffs(self, x):
        v = np.zeros(self.modes + 1)
        v[0] = x[1]
        v[2:] = x[2:]
        return v

    def evaluate(self, s, x):
        v = self.coeffs(x)
        phi = s * v
        phi[1] += s
        spec = DomainSpec(self.n, float(x[0]), Perturbation(tuple(phi)))
        res = solve_dirichlet(spec, self.grid)
        modes = boundary_flux(spec, res).modes()
        return modes, res

    def scaled(self, s, x):
        modes, res = self.evaluate(s, x)
        return modes[: self.modes + 1] / s, modes, res

    def jacobian(self, s, x, g0, step):
        J = np.empty((len(x), len(x)))
        for i in range(len(x)):
            h = step * max(1.0, abs(x[i]))
            xp = x.copy()
            xp[i] += h
            J[:, i] = (self.scaled(s, xp)[0] - g0) / h
        return J


def _newton(fmap, s, x0, opts):
    x = x0.copy()
    g, full, res = fmap.scaled(s, x)
    resid = float(np.max(np.abs(full[: fmap.modes + 1])))
    it = 0
    while resid >= opts.newton_tol:
        if it >= opts.max_newton or not np.isfinite(resid):
            return None
        J = fmap.jacobian(s, x, g, opts.fd_step)
        dx = np.linalg.solve(J, -g)
        x = x + dx
        it += 1
        g, full, res = fmap.scaled(s, x)
        resid = float(np.max(np.abs(full[: fmap.modes + 1])))
        log.debug("s=%.6g newton it %d resid %.3e", s, it, resid)
    # polish below tolerance so high modes of v are not Newton noise
    for _ in range(opts.polish):
        if it == 0 or resid == 0.0:
            break
        J = fmap.jacobian(s, x, g, opts.fd_step)
        xp = x + np.linalg.solve(J, -g)
        gp, fullp, resp = fmap.scaled(s, xp)
        rp = float(np.max(np.abs(fullp[: fmap.modes + 1])))
        if not rp < resid:
            break
        x, g, full, res, resid = xp, gp, fullp, resp, rp
        it += 1
    return x, resid, it, res, full


def _decay_ok(v, modes, tol, noise=0.0):
    """Last two retained modes below ``tol * max|v|`` or below the Newton noise level."""
    vmax = np.max(np.abs(v))
    if vmax == 0:
        return True
    tail = float(np.max(np.abs(v[modes - 1 : modes + 1])))
    return tail < tol * vmax or tail < noise


def _tail_noise(n, t_period, s, resid, modes):
    # a residual resid in F-hat moves v_k by about resid / (|s| |lambda_k|)
    lam = np.abs(eigenvalue(n, t_period, np.array([modes - 1, modes])))
    return 10.0 * resid / (abs(s) * float(np.min(lam)))


def trace_branch(n, s_max, steps, grid_config: GridConfig | None = None, options: TraceOptions | None = None) -> Branch:
    """Natural-parameter continuation of the branch from ``(T*, v = 0)``.

    Parameters
    ----------
    n : int
    s_max : float
        Final branch parameter; may be negative.
    steps : int
        Number of uniform steps ``s_j = j s_max / steps``.
    grid_config : GridConfig
    options : TraceOptions

    Returns
    -------
    Branch
        ``points[0]`` is ``s = 0``. A Newton failure halves the step; below
        ``min_step_fraction * |s_max|`` the trace stops and ``aborted`` is set.
    """
    n = check_dimension(n)
    if s_max == 0 or not math.isfinite(s_max):
        raise DomainError("s_max must be finite and nonzero")
    if int(steps) != steps or steps < 1:
        raise DomainError("steps must be a positive integer")
    grid = grid_config or GridConfig()
    opts = options or TraceOptions()
    cert = find_bifurcation(n)
    t_star = cert.t_star
    modes = opts.modes
    doubled = False

    def fresh_map():
        return _FluxMap(n, grid, modes)

    fmap = fresh_map()
    spec0 = DomainSpec(n, t_star)
    res0 = solve_dirichlet(spec0, grid)
    f0 = boundary_flux(spec0, res0).modes()
    pts = [BranchPoint(0.0, t_star, tuple([0.0] * (modes + 1)), float(np.max(np.abs(f0[: modes + 1]))), 0, res0, tuple(f0))]
    branch = Branch(n, pts, grid, t_star, modes)
    ds_nominal = s_max / steps
    min_step = opts.min_step_fraction * abs(s_max)
    targets = [j * ds_nominal for j in range(1, int(steps) + 1)]
    xs = [np.concatenate([[t_star], np.zeros(modes)])]
    ss = [0.0]
    jumps = []
    ti = 0
    while ti < len(targets):
        s_goal = targets[ti]
        s = s_goal
        accepted = False
        while not accepted:
            ds = s - ss[-1]
            if abs(ds) < min_step:
                branch.aborted = True
                branch.message = f"step fell below {min_step:.3g} near s={ss[-1]:.6g}"
                return branch
            if len(xs) >= 2:
                slope = (xs[-1] - xs[-2]) / (ss[-1] - ss[-2])
                guess = xs[-1] + slope * ds
            else:
                guess = xs[-1].copy()
            try:
                out = _newton(fmap, s, guess, opts)
            except (DomainError, NumericalError) as exc:
                log.info("newton at s=%.6g raised %s", s, exc)
                out = None
            if out is not None:
                x, resid, it, res, full = out
                v = fmap.coeffs(x)
                jump = float(np.max(np.abs(v - fmap.coeffs(xs[-1])))) / abs(ds)
                limit = branch.consistency_constant
                if limit is not None and jump > opts.consistency_slack * limit:
                    branch.consistency_violations += 1
                    log.info("continuation jump %.3g exceeds %.3g at s=%.6g", jump, opts.consistency_slack * limit, s)
                    out = None
            if out is None:
                s = ss[-1] + 0.5 * ds
                continue
            tail_ok = _decay_ok(v, modes, opts.decay_tol, _tail_noise(n, x[0], s, resid, modes))
            if not tail_ok and not doubled and grid.m_tau < 2 * modes + 1:
                doubled = True
                branch.message = f"spectral tail above {opts.decay_tol:g} at s={s:.6g}; grid cannot hold {2 * modes} modes"
                log.warning(branch.message)
            if not tail_ok and not doubled:
                log.info("spectral tail too heavy at s=%.6g; doubling M to %d", s, 2 * modes)
                doubled = True
                old = modes
                modes *= 2
                fmap = fresh_map()
                xs = [np.concatenate([xx, np.zeros(modes - old)]) for xx in xs]
                for p in branch.points:
                    p.v_coeffs = tuple(p.v_coeffs) + (0.0,) * (modes - old)
                branch.modes = modes
                continue
            accepted = True
            jumps.append(jump)
            if branch.consistency_constant is None and len(jumps) >= 3:
                branch.consistency_constant = max(jumps[:3])
            xs.append(x)
            ss.append(s)
            branch.points.append(BranchPoint(s, float(x[0]), tuple(v), resid, it, res, tuple(full)))
        if math.isclose(s, s_goal, rel_tol=0, abs_tol=1e-15 * max(1.0, abs(s_goal))):
            ti += 1
    return branch


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerificationReport:
    overdet_residual: float
    harmonic_residual: float
    u_min: float
    u_max: float
    decay_slope: float
    orthogonality: float
    grid: GridConfig
    samples: int
    residual_floor: float = float("nan")
    residual_chain_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "overdet_residual": self.overdet_residual,
            "harmonic_residual": self.harmonic_residual,
            "u_min": self.u_min,
            "u_max": self.u_max,
            "decay_slope": self.decay_slope,
            "orthogonality": self.orthogonality,
            "grid": self.grid.to_dict(),
            "samples": self.samples,
            "residual_floor": self.residual_floor,
            "residual_chain_ok": self.residual_chain_ok,
        }


def _overdet(spec, res, samples):
    _, g = boundary_gradient_norm(spec, res, samples)
    return float(np.max(np.abs(g - (spec.n - 3))))


def verify(point: BranchPoint, grid_config: GridConfig | None = None, n: int | None = None, refinement: float = 1.5) -> VerificationReport:
    """Re-solve ``point`` on a grid refined by ``refinement`` and measure the defects.

    ``overdet_residual`` is ``max | |grad u| - (n - 3) |`` over ``4 M`` boundary
    angles, ``harmonic_residual`` the interior ``L w`` residual, the decay
    slope is fitted on ``[r_max/4, r_max/2]``, and ``orthogonality`` is
    ``|int_0^{2 pi} v_s cos|``. The residual chain compares against
    ``4 * newton_residual`` plus the same defect of the straight cylinder on the
    refined grid.
    """
    if n is None:
        if point.solve is None:
            raise DomainError("verify needs n when the point carries no solve")
        n = point.solve.spec.n
    base = grid_config or (point.solve.field.config if point.solve is not None else GridConfig())
    fine = base.refined(refinement)
    M = len(point.v_coeffs) - 1
    samples = max(4 * M, 4)
    spec = DomainSpec(n, point.t_period, point.phi)
    res = solve_dirichlet(spec, fine)
    overdet = _overdet(spec, res, samples)
    Lw = apply(spec, res.field).values[1:-1]
    harmonic = float(np.max(np.abs(Lw)))
    interior = res.field.values[1:]
    slope = decay_slope(res.field, fine.r_max / 4.0, fine.r_max / 2.0)
    t = np.linspace(0.0, 2.0 * math.pi, 4 * M + 9)[:-1]
    v = np.cos(np.outer(t, np.arange(M + 1))) @ np.asarray(point.v_coeffs)
    ortho = abs(float(np.sum(v * np.cos(t)) * (2.0 * math.pi / len(t))))
    spec0 = DomainSpec(n, point.t_period)
    floor = _overdet(spec0, solve_dirichlet(spec0, fine), samples)
    chain_ok = overdet <= 4.0 * point.newton_residual + 10.0 * floor + 1e-12
    if not chain_ok:
        log.warning("residual chain violated: overdet %.3e vs newton %.3e floor %.3e", overdet, point.newton_residual, floor)
    return VerificationReport(
        overdet_residual=overdet,
        harmonic_residual=harmonic,
        u_min=float(interior.min()),
        u_max=float(interior.max()),
        decay_slope=slope,
        orthogonality=ortho,
        grid=fine,
        samples=samples,
        residual_floor=floor,
        residual_chain_ok=chain_ok,
    )
