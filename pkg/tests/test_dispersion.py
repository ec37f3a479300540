import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from exceptional_domains.dispersion import (
    capital_lambda,
    capital_lambda_derivative,
    critical_rho,
    eigenvalue,
    eigenvalue_derivative,
    eigenvalue_table,
)
from exceptional_domains.errors import DomainError

DIMS = range(4, 13)


def lambda_n6(rho):
    return (1 + rho - rho * rho) / (rho + 1)


@given(rho=st.floats(1e-6, 50.0))
def test_n4_closed_form(rho):
    assert capital_lambda(4, rho) == pytest.approx(1.0 - rho, abs=1e-13 * max(1, rho))


@given(rho=st.floats(1e-6, 50.0))
def test_n6_closed_form(rho):
    assert capital_lambda(6, rho) == pytest.approx(lambda_n6(rho), abs=1e-13 * max(1, rho))


@pytest.mark.parametrize("n", DIMS)
def test_value_at_zero(n):
    assert capital_lambda(n, 0.0) == 1.0
    assert capital_lambda(n, 1e-9) == pytest.approx(1.0, abs=1e-6)


def test_n6_at_one():
    assert capital_lambda(6, 1.0) == pytest.approx(0.5, rel=1e-15)


def test_array_input():
    rho = np.array([0.0, 0.5, 2.0])
    assert np.allclose(capital_lambda(4, rho), [1.0, 0.5, -1.0], atol=1e-15)


@pytest.mark.parametrize("n", [4, 5, 6, 9])
@pytest.mark.parametrize("rho", [0.3, 1.0, 2.7])
def test_derivative_against_central_difference(n, rho):
    h = 1e-5
    fd = (capital_lambda(n, rho + h) - capital_lambda(n, rho - h)) / (2 * h)
    assert capital_lambda_derivative(n, rho) == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_eigenvalue_examples():
    assert eigenvalue(4, 2 * math.pi, 1) == pytest.approx(0.0, abs=1e-15)
    for n in (4, 7):
        assert eigenvalue(n, 3.3, 0) == -(n - 3)
    lam = eigenvalue(4, 2 * math.pi, 100)
    assert abs(lam / 100 - 1.0) < 0.02


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_eigenvalue_rejects_period(bad):
    with pytest.raises(DomainError):
        eigenvalue(4, bad, 1)


@pytest.mark.parametrize("n", [3, 2, 4.5, True])
def test_dimension_rejected(n):
    with pytest.raises(DomainError):
        capital_lambda(n, 1.0)


def test_eigenvalue_derivative_matches_difference():
    for n, T in ((4, 5.0), (5, 4.0), (6, 7.0)):
        h = 1e-6
        fd = (eigenvalue(n, T + h, 1) - eigenvalue(n, T - h, 1)) / (2 * h)
        assert eigenvalue_derivative(n, T, 1) == pytest.approx(fd, rel=1e-6)


def test_critical_closed_forms():
    assert critical_rho(4).rho_star == pytest.approx(1.0, abs=1e-14)
    assert critical_rho(4).t_star == pytest.approx(2 * math.pi, abs=1e-13)
    assert critical_rho(6).rho_star == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-14)
    assert critical_rho(6).t_star == pytest.approx(4 * math.pi / (1 + math.sqrt(5)), abs=1e-13)
    cp5 = critical_rho(5)
    assert 0 < cp5.rho_star < math.sqrt(3)
    assert abs(capital_lambda(5, cp5.rho_star)) < 1e-13


@pytest.mark.parametrize("n", DIMS)
def test_critical_invariants(n):
    cp = critical_rho(n)
    assert cp.rho_star < math.sqrt(n - 2)
    assert cp.t_star > 2 * math.pi / math.sqrt(n - 2)
    assert cp.lambda1_slope < 0
    assert (n - 2) / cp.rho_star - cp.rho_star > 1e-6
    # slope from the closed form agrees with the general chain rule
    assert cp.lambda1_slope == pytest.approx(eigenvalue_derivative(n, cp.t_star, 1), rel=1e-10)


@pytest.mark.parametrize("n", DIMS)
def test_sign_change_once(n):
    rho = np.linspace(1e-6, 10.0, 10_000)
    lam = capital_lambda(n, rho)
    assert np.count_nonzero(np.diff(np.sign(lam)) != 0) == 1
    cp = critical_rho(n)
    assert capital_lambda(n, cp.rho_star / 2) > 0
    after = np.linspace(cp.rho_star * (1 + 1e-6), 4 * cp.rho_star, 200)
    assert np.all(capital_lambda(n, after) < 0)


@pytest.mark.parametrize("n", DIMS)
def test_only_mode_one_vanishes(n):
    cp = critical_rho(n)
    assert abs(eigenvalue(n, cp.t_star, 1)) < 1e-12
    others = np.array([0] + list(range(2, 51)))
    assert np.all(np.abs(eigenvalue(n, cp.t_star, others)) > 1e-6)


def test_table_examples():
    tab = eigenvalue_table(4, 2 * math.pi, 3)
    assert np.allclose(tab.lambda_k, [-1, 0, 1, 2], atol=1e-14)
    assert eigenvalue_table(4, math.pi, 1).lambda_k[1] == pytest.approx(1.0, abs=1e-14)
    assert eigenvalue_table(5, 1e6, 1).lambda_k[1] == pytest.approx(-2.0, abs=1e-3)


def test_table_csv_format():
    tab = eigenvalue_table(5, 6.0, 20)
    lines = tab.to_csv().strip().splitlines()
    assert lines[0] == "k,rho,Lambda,lambda_k"
    assert len(lines) == 22
    k, rho, L, lam = lines[3].split(",")
    assert float(rho) == tab.rho[2] and float(L) == tab.lambda_cap[2] and float(lam) == tab.lambda_k[2]
    assert np.all(np.diff(tab.rho) > 0)
    assert tab.samples[0] == (0.0, 1.0)


def test_table_rejects_kmax():
    with pytest.raises(DomainError):
        eigenvalue_table(4, 1.0, 0)


@given(n=st.integers(4, 12), T=st.floats(0.5, 30.0))
def test_eigenvalues_increase_with_k(n, T):
    # -Lambda' > 0 beyond the root and Lambda(rho) decreasing: lambda_k grows with k
    lam = eigenvalue(n, T, np.arange(0, 30))
    assert np.all(np.diff(lam) > 0)
