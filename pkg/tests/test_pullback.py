import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exceptional_domains.errors import ContractError, DomainError
from exceptional_domains.geometry import DomainSpec, Perturbation
from exceptional_domains.grid import GridConfig, GridField, cosine_matrices, fd_weights, radial_matrices
from exceptional_domains.pullback import (
    _coefficients,
    analytic_kernel,
    apply,
    chainrule_oracle,
    coefficients_at,
    pointwise_operator,
)


def random_spec(rng, sup=0.7, modes=4):
    n = int(rng.integers(4, 9))
    c = rng.uniform(-1, 1, modes + 1)
    c *= sup * rng.uniform(0.1, 1.0) / np.abs(c).sum()
    return DomainSpec(n, float(rng.uniform(1.5, 12.0)), Perturbation(tuple(c)))


def kernel_residual(spec, r, tau, coef=None):
    K = analytic_kernel(spec, r, tau)
    coef = coef or coefficients_at(spec, r, tau)
    return pointwise_operator(coef, spec.n, r, K["w_r"], K["w_rr"], K["w_tautau"], K["w_rtau"])


def mode_function(k):
    return lambda r, t: math.exp(-r) * math.cos(k * t)


# ---------------------------------------------------------------- coefficients


def test_unperturbed_coefficients():
    spec = DomainSpec(5, 3.0)
    c = coefficients_at(spec, np.array([1.0, 2.0, 9.0]), 0.7)
    assert np.allclose(c.c_lap, 1.0) and c.c_tautau == pytest.approx((2 * math.pi / 3) ** 2)
    assert np.all(c.c_rr == 0) and np.all(c.c_grad == 0) and np.all(c.c_mixed == 0)


@pytest.mark.parametrize("c0", [-0.6, 0.2, 0.8])
def test_boundary_constant_profile(c0):
    c = coefficients_at(DomainSpec(4, 2.0, Perturbation((c0,))), 1.0, 0.3)
    assert float(c.c_lap) == pytest.approx((1 + c0) ** -2, rel=1e-14)


def test_ellipticity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        spec = random_spec(rng, sup=0.9)
        c = coefficients_at(spec, np.exp(rng.uniform(0, 4, 50)), rng.uniform(0, 2 * math.pi, 50))
        assert np.all(c.c_lap > 0)


def test_coefficient_decay_order():
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.5)))
    tau = np.linspace(0, math.pi, 401)
    size = []
    for r in (10.0, 20.0, 40.0):
        c = coefficients_at(spec, r, tau)
        size.append(np.max(np.abs(c.c_rr) + np.abs(c.c_grad) + np.abs(c.c_mixed)))
        assert np.max(np.abs(c.c_lap - 1)) < 2.0 / r**2
    orders = np.log2(np.array(size[:-1]) / np.array(size[1:]))
    assert np.all(orders >= 1.9)


def test_rejects_inside_reference_ball():
    with pytest.raises(DomainError):
        coefficients_at(DomainSpec(4, 1.0), 0.9, 0.0)


# ---------------------------------------------------------------- analytic kernel


def test_kernel_annihilated_pointwise():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        spec = random_spec(rng)
        r = np.exp(rng.uniform(0, math.log(30), 64))
        tau = rng.uniform(0, 2 * math.pi, 64)
        worst = max(worst, float(np.max(np.abs(kernel_residual(spec, r, tau)))))
    assert worst < 1e-10


@pytest.mark.parametrize("rank_one, mixed", [(1.0, 1.0), (4.0, 1.0), (4.0, 2.0)])
def test_kernel_detects_misplaced_factors(rank_one, mixed):
    # weight 4 on the phi'^2 rank-one term or no doubling of the mixed term breaks L W = 0
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.5)))
    r, tau = np.array([1.3, 2.0]), np.array([0.7, 2.2])
    coef = _coefficients(spec, r, tau, rank_one, mixed)
    assert np.max(np.abs(kernel_residual(spec, r, tau, coef))) > 1e-3


def test_kernel_derivatives_against_differences():
    spec = DomainSpec(6, 4.0, Perturbation((0.1, 0.3, -0.1)))
    r, t, h = 1.6, 0.8, 1e-5
    K = analytic_kernel(spec, r, t)

    def W(rr, tt):
        return analytic_kernel(spec, rr, tt)["w"]

    assert K["w_r"] == pytest.approx((W(r + h, t) - W(r - h, t)) / (2 * h), rel=1e-8)
    assert K["w_tau"] == pytest.approx((W(r, t + h) - W(r, t - h)) / (2 * h), rel=1e-7)
    assert K["w_rtau"] == pytest.approx(
        (W(r + h, t + h) - W(r + h, t - h) - W(r - h, t + h) + W(r - h, t - h)) / (4 * h * h), rel=1e-4
    )


# ---------------------------------------------------------------- oracle


def test_oracle_example_point():
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.3)))
    op, lap = chainrule_oracle(spec, mode_function(1), (1.7, 0.9), step=1e-4)
    assert abs(op - lap) < 1e-5


def test_oracle_straight_kernel():
    spec = DomainSpec(5, 3.0)
    op, lap = chainrule_oracle(spec, lambda r, t: r ** (3 - 5), (2.0, 0.4))
    assert abs(op) < 1e-6 and abs(lap) < 1e-6


def test_oracle_perturbed_kernel():
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.5)))
    op, lap = chainrule_oracle(
        spec, lambda r, t: float(analytic_kernel(spec, r, t)["w"]), (1.5, 1.1)
    )
    assert abs(op) < 1e-5 and abs(lap) < 1e-5


def test_oracle_random_points():
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(200):
        spec = random_spec(rng)
        point = (rng.uniform(1.2, 5.0), rng.uniform(0, 2 * math.pi))
        op, lap = chainrule_oracle(spec, mode_function(i % 4), point)
        worst = max(worst, abs(op - lap))
    assert worst < 1e-4


@pytest.mark.parametrize("rank_one, mixed", [(4.0, 1.0), (1.0, 1.0)])
def test_oracle_discriminates(rank_one, mixed, monkeypatch):
    import exceptional_domains.pullback as pb

    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.4)))
    point = (1.5, 1.0)
    honest = chainrule_oracle(spec, mode_function(2), point)
    monkeypatch.setattr(pb, "coefficients_at", lambda s, r, t: _coefficients(s, r, t, rank_one, mixed))
    altered = pb.chainrule_oracle(spec, mode_function(2), point)
    assert abs(honest[0] - honest[1]) < 1e-5
    assert abs(altered[0] - altered[1]) > 1e-2


def test_oracle_rejects_boundary_point():
    with pytest.raises(DomainError):
        chainrule_oracle(DomainSpec(4, 1.0), mode_function(0), (1.0, 0.0))


# ---------------------------------------------------------------- grid


def test_grid_nodes():
    cfg = GridConfig(r_max=20.0, n_r=50, m_tau=17)
    assert cfg.r_nodes[0] == 1.0 and np.all(np.diff(cfg.r_nodes) > 0)
    assert cfg.r_nodes[-1] == pytest.approx(20.0)
    assert cfg.tau_nodes[0] == 0.0 and cfg.tau_nodes[-1] == math.pi


@pytest.mark.parametrize("m", [0, 1, 3])
def test_fd_weights_exact_on_polynomials(m):
    x = np.array([-0.3, -0.1, 0.0, 0.2, 0.5, 0.55, 0.9])
    w = fd_weights(0.1, x, m)
    for p in range(len(x)):
        exact = math.factorial(p) / math.factorial(p - m) * 0.1 ** (p - m) if p >= m else 0.0
        assert np.dot(w, x**p) == pytest.approx(exact, abs=1e-9)


def test_radial_matrices_order():
    errs = []
    for n in (41, 81):
        cfg = GridConfig(r_max=10.0, n_r=n, m_tau=4)
        D1, D2 = radial_matrices(cfg)
        f = np.sin(cfg.xi)
        errs.append((np.max(np.abs(D1 @ f - np.cos(cfg.xi))), np.max(np.abs(D2 @ f + f))))
    for a, b in zip(*errs):
        assert math.log2(a / b) > 5.0


@given(m=st.integers(4, 40), k=st.integers(0, 3))
def test_cosine_matrices_exact(m, k):
    C, E, D1, D2 = cosine_matrices(m)
    tau = np.linspace(0, math.pi, m)
    f = np.cos(k * tau)
    assert np.allclose(E @ C, np.eye(m), atol=1e-12)
    assert np.allclose(D1 @ f, -k * np.sin(k * tau), atol=1e-10)
    assert np.allclose(D2 @ f, -(k**2) * f, atol=1e-9)


def test_gridfield_csv_roundtrip():
    cfg = GridConfig(r_max=12.0, n_r=20, m_tau=5)
    fld = GridField.from_function(lambda r, t: np.exp(-r) * np.cos(t) / 3, cfg)
    text = fld.to_csv()
    assert text.splitlines()[0] == "r,tau,value"
    back = GridField.from_csv(text, cfg)
    assert np.array_equal(back.values, fld.values)


def test_gridfield_shape_checked():
    with pytest.raises(ContractError):
        GridField(np.zeros((3, 3)), GridConfig(n_r=20, m_tau=4))


# ---------------------------------------------------------------- discrete apply


def test_apply_annihilates_constants():
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.5, 0.1)))
    cfg = GridConfig(r_max=20.0, n_r=60, m_tau=16)
    out = apply(spec, GridField(np.ones((60, 16)), cfg, spec))
    assert np.max(np.abs(out.values)) < 1e-9


def test_apply_straight_kernel():
    spec = DomainSpec(5, 2 * math.pi)
    cfg = GridConfig()
    fld = GridField.from_function(lambda r, t: r ** (3.0 - 5), cfg, spec)
    assert np.max(np.abs(apply(spec, fld).values)) < 1e-8


def test_apply_spec_mismatch():
    cfg = GridConfig(n_r=30, m_tau=8)
    fld = GridField(np.ones((30, 8)), cfg, DomainSpec(4, 1.0))
    with pytest.raises(ContractError):
        apply(DomainSpec(5, 1.0), fld)


def kernel_grid_error(spec, n_r, m, order):
    cfg = GridConfig(r_max=10.0, n_r=n_r, m_tau=m, order=order)
    fld = GridField.from_function(lambda r, t: analytic_kernel(spec, r, t)["w"], cfg, spec)
    return float(np.max(np.abs(apply(spec, fld).values)))


@pytest.mark.parametrize("order, grids", [(2, ((161, 33), (321, 65), (641, 129))), (6, ((81, 33), (161, 65), (321, 65)))])
def test_apply_kernel_three_grid_order(order, grids):
    spec = DomainSpec(4, 2 * math.pi, Perturbation((0.0, 0.2)))
    e = [kernel_grid_error(spec, n, m, order) for n, m in grids]
    rates = [math.log2(e[0] / e[1]), math.log2(e[1] / e[2])]
    assert min(rates) >= 1.9
    assert min(rates) >= order - 1


def test_apply_kernel_default_stencils_small():
    spec = DomainSpec(6, 3.0, Perturbation((0.02, 0.1, -0.03)))
    cfg = GridConfig()
    fld = GridField.from_function(lambda r, t: analytic_kernel(spec, r, t)["w"], cfg, spec)
    assert np.max(np.abs(apply(spec, fld).values)) < 1e-6


@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_apply_linear(a, b):
    spec = DomainSpec(4, 5.0, Perturbation((0.0, 0.2)))
    cfg = GridConfig(r_max=10.0, n_r=20, m_tau=6)
    rng = np.random.default_rng(5)
    u, v = rng.normal(size=(2, 20, 6))
    lhs = apply(spec, GridField(a * u + b * v, cfg)).values
    rhs = a * apply(spec, GridField(u, cfg)).values + b * apply(spec, GridField(v, cfg)).values
    assert np.allclose(lhs, rhs, atol=1e-8 * (1 + np.max(np.abs(rhs))))
