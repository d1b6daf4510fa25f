import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc
from scipy.special import gamma as G

from hkfde import (
    CauchyProblem,
    FhkParams,
    ParameterDomainError,
    RegimeError,
    SGrid,
    SolveOptions,
    classical_reduction_solve,
    katugampola_integral,
    linear_solution,
    mittag_leffler,
    ml_series,
    picard_solve,
)


@pytest.mark.parametrize("z", np.linspace(-10, 10, 21))
def test_exp(z):
    assert mittag_leffler(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-12)


@pytest.mark.parametrize("z", np.linspace(-5, 5, 11))
def test_cosh(z):
    assert mittag_leffler(2.0, 1.0, z * z) == pytest.approx(math.cosh(z), rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.3, 0.6), (0.5, 2.0), (1.7, 0.4)])
def test_zero_argument(a, b):
    assert mittag_leffler(a, b, 0.0) == pytest.approx(1 / G(b), rel=1e-15)


@pytest.mark.parametrize("z", [-30.0, -10.0, -1.0, 0.5, 3.0])
def test_half_order_erfc(z):
    # E_{1/2}(z) = exp(z^2) erfc(-z)
    ref = float(mpmath.exp(z * z) * mpmath.erfc(-z))
    assert mittag_leffler(0.5, 1.0, z) == pytest.approx(ref, rel=1e-10)


def test_regime_errors():
    with pytest.raises(RegimeError):
        mittag_leffler(0.5, 1.0, 51.0)
    with pytest.raises(RegimeError):
        mittag_leffler(0.3, 0.6, 50.0)
    with pytest.raises(ParameterDomainError):
        mittag_leffler(0.0, 1.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.3, 2.0), st.floats(-8.0, 8.0))
def test_tail_bound_honest(a, b, z):
    r = ml_series(a, b, z)
    assert r.tail_bound < 1e-12
    with mpmath.workdps(80):
        am, bm, zm = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(z)
        longer = mpmath.fsum(zm**k / mpmath.gamma(am * k + bm) for k in range(r.truncation + 10))
    # the tail bound covers truncation; terms built in log space carry their own rounding
    assert abs(float(longer) - r.value) <= r.tail_bound + 1e-12 * max(1.0, abs(r.value))


def test_array_argument():
    z = np.array([[0.0, 1.0], [-1.0, 2.0]])
    v = mittag_leffler(1.0, 1.0, z)
    assert v.shape == (2, 2) and np.allclose(v, np.exp(z))


def test_linear_solution_homogeneous():
    p = FhkParams(0.4, 0.5, 2.0)
    g = SGrid.uniform(1.0, 8, 2.0)
    assert np.allclose(linear_solution(p, 3.0, 0.0, g).y, 3.0 / G(p.gamma))


def test_linear_solution_caputo_relaxation():
    p = FhkParams(0.5, 1.0, 1.0)
    g = SGrid.uniform(2.0, 16)
    t = g.t
    assert np.allclose(linear_solution(p, 1.0, -1.0, g).y, np.exp(t) * erfc(np.sqrt(t)), rtol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_series_terms_follow_power_rule(k):
    a, gam, rho = 0.5, 0.75, 1.0
    g = SGrid.graded(1.0, 256, rho, 2.0)
    s = g.nodes
    sig = k * a + gam
    # I^a applied to s^(sig-1)/Gamma(sig) gives term k+1; the power rides in the kernel
    got = katugampola_integral(a, rho, g, np.full_like(s, 1 / G(sig)), sing=1 - sig)
    nxt = s[1:] ** (sig + a - 1) / G(sig + a)
    assert np.max(np.abs(got[1:] - nxt)) <= 1e-10


def test_classical_homogeneous_riemann_liouville():
    p = FhkParams(0.5, 0.0, 1.0)
    prob = CauchyProblem(p, 2.0, lambda t, x: 0.0 * x, lam=0.0)
    t = np.linspace(0, 1, 17)
    out = classical_reduction_solve(prob, t)
    assert np.allclose(out.x[1:], 2.0 * t[1:] ** -0.5 / G(0.5), rtol=1e-14)


def test_classical_caputo_relaxation_discretisation():
    # the direct path is a discretisation: agreement with the closed form is
    # at quadrature accuracy, not at rounding level
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: -x, lam=0.0)
    t = np.linspace(0, 1, 129)
    out = classical_reduction_solve(prob, t)
    ref = linear_solution(p, 1.0, -1.0, SGrid(t, 1.0))
    assert np.max(np.abs(out.y - ref.y)) <= 2e-3


def test_classical_matches_general_solver():
    p = FhkParams(0.6, 1.0, 1.0)
    prob = CauchyProblem(p, 0.5, lambda t, x: np.sin(x) + t, lam=0.0)
    rep = picard_solve(prob, SolveOptions(N=64, tol=1e-13))
    out = classical_reduction_solve(prob, rep.traj.t, tol=1e-13)
    assert np.max(np.abs(out.y - rep.traj.y)) <= 10 * 1e-13


@pytest.mark.parametrize("a,b,rho", [(0.5, 0.5, 1.0), (0.5, 0.0, 2.0)])
def test_classical_precondition(a, b, rho):
    prob = CauchyProblem(FhkParams(a, b, rho), 1.0, lambda t, x: x)
    with pytest.raises(ParameterDomainError):
        classical_reduction_solve(prob, np.linspace(0, 1, 5))
