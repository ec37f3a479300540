import math

import numpy as np
import pytest

from exceptional_domains.bifurcation import (
    BranchPoint,
    LinearizedOperator,
    TraceOptions,
    find_bifurcation,
    linearized_action,
    trace_branch,
    verify,
)
from exceptional_domains.dispersion import eigenvalue
from exceptional_domains.errors import DomainError
from exceptional_domains.geometry import DomainSpec, Perturbation
from exceptional_domains.grid import GridConfig
from exceptional_domains.solver import boundary_flux, solve_dirichlet

COARSE = GridConfig(r_max=50.0, n_r=120, m_tau=16)


@pytest.fixture(scope="module")
def coarse_branch():
    return trace_branch(4, 0.02, 4, COARSE)


def test_linearized_action_examples():
    assert np.allclose(linearized_action(4, 2 * math.pi, [0, 1, 0, 0]), 0.0, atol=1e-15)
    for n in (4, 7):
        out = linearized_action(n, 3.0, [1, 0, 0])
        assert out[0] == -(n - 3) and np.all(out[1:] == 0)


def test_linearized_operator_diagonal():
    op = LinearizedOperator.build(5, 4.0, 6)
    assert op.eigenvalues[0] == -2.0
    v = np.arange(1.0, 8.0)
    assert np.allclose(op(v), [eigenvalue(5, 4.0, k) * v[k] for k in range(7)])
    with pytest.raises(DomainError):
        op(np.ones(9))


def test_pde_linearization_is_diagonal():
    # finite-difference derivative of F at phi = 0, one cosine direction at a time
    n, T, eps = 5, 4.0, 1e-4
    cfg = GridConfig(n_r=200, m_tau=16)
    base = DomainSpec(n, T)
    f0 = boundary_flux(base, solve_dirichlet(base, cfg)).modes()[:7]
    for k in range(7):
        c = [0.0] * (k + 1)
        c[k] = eps
        spec = DomainSpec(n, T, Perturbation(tuple(c)))
        d = (boundary_flux(spec, solve_dirichlet(spec, cfg)).modes()[:7] - f0) / eps
        lam = eigenvalue(n, T, k)
        assert d[k] == pytest.approx(lam, rel=5e-3)
        leak = np.delete(d, k)
        assert np.max(np.abs(leak)) < 1e-3 * max(abs(lam), 1.0)


@pytest.mark.parametrize("n, t_star", [(4, 2 * math.pi), (6, 4 * math.pi / (1 + math.sqrt(5)))])
def test_find_bifurcation_examples(n, t_star):
    cert = find_bifurcation(n)
    assert cert.t_star == pytest.approx(t_star, abs=1e-12)
    assert cert.kernel_mode == 1 and abs(cert.lambda1_at_star) < 1e-12
    assert cert.min_abs_other > 1e-6 and cert.slope < 0


@pytest.mark.parametrize("n", range(4, 13))
def test_find_bifurcation_bound(n):
    assert find_bifurcation(n).t_star > 2 * math.pi / math.sqrt(n - 2)


def test_branch_starts_at_bifurcation(coarse_branch):
    p0 = coarse_branch[0]
    assert p0.s == 0.0 and p0.iterations == 0
    assert p0.t_period == find_bifurcation(4).t_star
    assert all(c == 0.0 for c in p0.v_coeffs)


def test_branch_converges_with_orthogonality(coarse_branch):
    assert not coarse_branch.aborted and len(coarse_branch) == 5
    for p in coarse_branch:
        assert p.newton_residual < 1e-8
        assert p.v_coeffs[1] == 0.0
        assert p.phi.sup_norm() < 1
    assert [p.s for p in coarse_branch] == pytest.approx([0.0, 0.005, 0.01, 0.015, 0.02])


def test_branch_orders_in_s(coarse_branch):
    t_star = coarse_branch.t_star
    half, full = coarse_branch[2], coarse_branch[4]
    ratio_v = np.max(np.abs(full.v_coeffs)) / np.max(np.abs(half.v_coeffs))
    assert 1.8 < ratio_v < 2.2
    # |T_s - T*| = O(s); the reflection symmetry makes it O(s^2) here
    ratio_t = abs(full.t_period - t_star) / abs(half.t_period - t_star)
    assert ratio_t > 1.8
    assert abs(full.t_period - t_star) < 0.02


def test_branch_reflection_symmetry(coarse_branch):
    neg = trace_branch(4, -0.02, 4, COARSE)
    for p, q in zip(coarse_branch, neg):
        assert q.t_period == pytest.approx(p.t_period, abs=1e-6)
        k = np.arange(len(p.v_coeffs))
        assert np.allclose(q.v_coeffs, -((-1.0) ** k) * np.asarray(p.v_coeffs), atol=1e-7)


def test_branch_consistency_constant(coarse_branch):
    assert coarse_branch.consistency_constant is not None
    assert coarse_branch.consistency_violations == 0


def test_branch_doubles_truncation_when_tail_heavy():
    b = trace_branch(4, 0.01, 1, COARSE, TraceOptions(modes=2))
    assert b.modes == 4 and len(b[-1].v_coeffs) == 5 and not b.aborted


def test_branch_aborts_with_partial_result():
    opts = TraceOptions(max_newton=2, min_step_fraction=0.3)
    b = trace_branch(4, 1.2, 1, GridConfig(n_r=40, m_tau=16), opts)
    assert b.aborted and len(b) >= 1 and b[0].s == 0.0
    assert "step" in b.message


def test_trace_rejects_bad_arguments():
    with pytest.raises(DomainError):
        trace_branch(4, 0.0, 3, COARSE)
    with pytest.raises(DomainError):
        trace_branch(4, 0.01, 0, COARSE)


def test_verify_straight_point(coarse_branch):
    report = verify(coarse_branch[0], COARSE)
    assert report.overdet_residual < 1e-6
    assert 0 < report.u_min and report.u_max < 1
    assert report.decay_slope == pytest.approx(-1.0, abs=0.05)
    assert report.grid.n_r == 180 and report.grid.m_tau == 24


def test_verify_branch_point(coarse_branch):
    report = verify(coarse_branch[-1], COARSE)
    assert report.overdet_residual < 1e-4
    assert report.orthogonality < 1e-14
    assert 0 < 1 - report.u_max and 1 - report.u_min < 1
    assert all(np.isfinite(v) for v in report.to_dict().values() if isinstance(v, float))


def test_branch_point_records():
    p = BranchPoint(0.1, 6.0, (0.01, 0.0, -0.02), 1e-9)
    assert p.phi.coeffs == pytest.approx((0.001, 0.1, -0.002))
    assert p.to_dict() == {"s": 0.1, "T": 6.0, "v_coeffs": [0.01, 0.0, -0.02], "newton_residual": 1e-9, "iterations": 0}
