import math

import numpy as np
import pytest
from scipy.special import gamma as G

from hkfde import (
    CauchyProblem,
    FhkParams,
    IncompatibleInputError,
    ParameterDomainError,
    RhsEvaluationError,
    SGrid,
    SolveOptions,
    WeightedTrajectory,
    compile_rhs,
    estimate_L,
    fixed_point_residual,
    linear_solution,
    local_radius,
    local_radius_printed,
    mittag_leffler,
    picard_solve,
    picard_solve_system,
    volterra_rhs,
)

SINGULAR_RHS = "sin(1 + t^(2/3) * x^2) / t^(1/3)"


def singular_problem():
    return CauchyProblem(FhkParams(0.5, 1 / 3, 0.5), math.sqrt(math.pi) / 2, compile_rhs(SINGULAR_RHS),
                         lam=1 / 3, horizon=1.0)


def test_volterra_rhs_homogeneous():
    p = FhkParams(0.5, 0.5, 2.0)
    prob = CauchyProblem(p, 2.0, lambda t, x: 0 * x)
    g = SGrid.uniform(1.0, 16, 2.0)
    out = volterra_rhs(prob, WeightedTrajectory(p, g, np.ones(17)))
    assert np.allclose(out.y, 2.0 / G(p.gamma), rtol=0, atol=1e-15)


def test_volterra_rhs_constant_forcing():
    # x0 = 0, phi = 1 gives x = s^alpha / Gamma(alpha + 1)
    p = FhkParams(0.5, 1.0, 2.0)
    prob = CauchyProblem(p, 0.0, lambda t, x: 1 + 0 * x)
    g = SGrid.uniform(1.0, 32, 2.0)
    out = volterra_rhs(prob, WeightedTrajectory(p, g, np.zeros(33)))
    assert np.allclose(out.x, g.nodes**0.5 / G(1.5), atol=1e-13)


def test_volterra_rhs_reports_bad_rhs():
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, compile_rhs("ln(x - 2)"))
    g = SGrid.uniform(1.0, 8)
    with pytest.raises(RhsEvaluationError) as info:
        volterra_rhs(prob, WeightedTrajectory(p, g, np.ones(9)))
    assert info.value.t == pytest.approx(0.125)
    assert info.value.x == pytest.approx(1.0)


def test_volterra_rhs_beyond_horizon():
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: x, horizon=0.5)
    with pytest.raises(IncompatibleInputError):
        volterra_rhs(prob, WeightedTrajectory(p, SGrid.uniform(1.0, 8), np.ones(9)))


def test_homogeneous_converges_immediately():
    p = FhkParams(0.3, 0.2, 0.7)
    prob = CauchyProblem(p, 1.5, lambda t, x: 0 * x)
    rep = picard_solve(prob, SolveOptions(N=32))
    assert rep.converged and rep.iterations <= 2
    assert np.allclose(rep.traj.y, 1.5 / G(p.gamma), atol=1e-15)


def test_caputo_relaxation():
    p = FhkParams(0.7, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: -x)
    rep = picard_solve(prob, SolveOptions(N=512))
    assert rep.converged
    assert np.max(np.abs(rep.traj.x - mittag_leffler(0.7, 1.0, -rep.traj.t**0.7))) <= 1e-3


def test_converged_report_is_honest():
    prob = CauchyProblem(FhkParams(0.6, 0.5, 1.0), 1.0, lambda t, x: np.cos(x) - 0.5 * x, lam=0.4)
    rep = picard_solve(prob, SolveOptions(N=128, tol=1e-11))
    assert rep.converged
    assert fixed_point_residual(prob, rep.traj) <= 1e-11


def test_non_convergence_is_reported():
    prob = CauchyProblem(FhkParams(0.5, 1.0, 1.0), 1.0, lambda t, x: 5 * x)
    rep = picard_solve(prob, SolveOptions(N=64, max_iter=3))
    assert not rep.converged and rep.iterations == 3
    assert "cap" in rep.message


def test_divergence_is_reported():
    prob = CauchyProblem(FhkParams(0.5, 1.0, 1.0), 1.0, lambda t, x: x**3, horizon=5.0)
    rep = picard_solve(prob, SolveOptions(N=64))
    assert not rep.converged and "diverged" in rep.message


def test_long_horizon_stagnation_is_reported():
    # example with a strongly non-normal Picard map on [0, 1]: rounding
    # noise is amplified into an exact 2-cycle, which is detected
    rep = picard_solve(singular_problem(), SolveOptions(N=128, tol=1e-15, max_iter=300))
    assert not rep.converged
    assert "2-cycle" in rep.message


def test_interval_checks():
    prob = CauchyProblem(FhkParams(0.5, 1.0, 1.0), 1.0, lambda t, x: x, horizon=1.0)
    with pytest.raises(ParameterDomainError):
        picard_solve(prob, interval=2.0)
    with pytest.raises(ParameterDomainError):
        picard_solve(prob, interval=0.0)
    rep = picard_solve(prob, SolveOptions(N=16), interval=(0.0, 0.5))
    assert rep.traj.t[-1] == pytest.approx(0.5)


def test_radius_examples():
    p = FhkParams(0.5, 0.0, 1.0)
    assert local_radius(1.0, 1.0, 0.0, p, 10.0) == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-15)
    assert local_radius(1.0, 1.0, 0.0, p, 0.1) == 0.1
    assert local_radius(1.0, 0.0, 0.0, p, 3.0) == 3.0


def test_radius_singular_problem():
    # corrected exponent gives a tiny radius whose ball stays invariant;
    # the printed exponent gives a larger one on which iterates leave the ball
    prob = singular_problem()
    p = prob.params
    h = local_radius(1.0, 1.0, 1 / 3, p, 1.0)
    hp = local_radius_printed(1.0, 1.0, 1 / 3, p, 1.0)
    assert h == pytest.approx(3.06e-8, rel=1e-2)
    assert hp == pytest.approx(0.0219, rel=1e-2)
    y0 = prob.x0_vec[0] / G(p.gamma)
    for radius, inside in ((h, True), (hp, False)):
        rep = picard_solve(prob, SolveOptions(N=256), interval=radius, keep_history=True)
        exc = max(float(np.max(np.abs(y - y0))) for y in rep.history)
        assert (exc <= 1.0) is inside


def test_radius_domain():
    p = FhkParams(0.5, 0.5, 0.5)  # rho(alpha - gamma + 1) = 0.375
    with pytest.raises(ParameterDomainError):
        local_radius(1.0, 1.0, 0.4, p, 1.0)
    with pytest.raises(ParameterDomainError):
        local_radius(0.0, 1.0, 0.1, p, 1.0)


def test_estimate_L_examples():
    g = SGrid.graded(1.0, 64, 1.0, 2.0)
    const = CauchyProblem(FhkParams(0.5, 0.5), 1.0, lambda t, x: -3.0 + 0 * x)
    assert estimate_L(const, 1.0, g) == pytest.approx(3.0)
    prob = singular_problem()
    L = estimate_L(prob, 1.0, SGrid.graded(1.0, 512, 0.5, 2.0))
    assert 0.5 <= L <= 1.0
    lin = CauchyProblem(FhkParams(0.5, 1.0), 0.0, lambda t, x: x)
    assert estimate_L(lin, 1.0, g) == pytest.approx(1.0)


def test_system_degenerate_matches_scalar():
    prob = CauchyProblem(FhkParams(0.5, 0.5, 1.0), 1.0, lambda t, x: -x + t, lam=0.25)
    a = picard_solve(prob, SolveOptions(N=64))
    b = picard_solve_system(prob, SolveOptions(N=64))
    assert b.traj.y.shape == (1, 65)
    assert np.array_equal(a.traj.y, b.traj.y[0])


def test_system_decoupled_homogeneous():
    p = FhkParams(0.4, 0.5, 2.0)
    prob = CauchyProblem(p, [1.0, -2.0], lambda t, x: 0 * x)
    rep = picard_solve_system(prob, SolveOptions(N=16))
    assert np.allclose(rep.traj.y[0], 1.0 / G(p.gamma))
    assert np.allclose(rep.traj.y[1], -2.0 / G(p.gamma))


def test_system_coupled_symmetric():
    p = FhkParams(0.5, 0.5, 1.0)
    prob = CauchyProblem(p, [1.0, 1.0], compile_rhs(["x2", "x1"]), lam=[0.25, 0.25])
    rep = picard_solve_system(prob, SolveOptions(N=512, grade=3.0))
    assert rep.converged
    assert np.array_equal(rep.traj.y[0], rep.traj.y[1])
    ref = linear_solution(p, 1.0, 1.0, rep.traj.grid)
    assert np.max(np.abs(rep.traj.y[0] - ref.y)) <= 1e-3


def test_ball_invariance_singular_problem():
    prob = singular_problem()
    L = estimate_L(prob, 1.0, SGrid.graded(1.0, 512, 0.5, 2.0))
    h = local_radius(1.0, L, 1 / 3, prob.params, 1.0)
    rep = picard_solve(prob, SolveOptions(N=512, k=1.0), interval=h, keep_history=True)
    y0 = prob.x0_vec[0] / G(prob.params.gamma)
    assert all(np.max(np.abs(y - y0)) <= 1.0 for y in rep.history)
    assert rep.max_excursion <= 1.0
