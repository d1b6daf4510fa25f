"""Acceptance checks; a PASS/FAIL line per criterion is printed in the summary."""
import math
import time

import numpy as np
import pytest
from scipy.special import gamma as G

from hkfde import (
    CauchyProblem,
    ContinuationOptions,
    FhkParams,
    SGrid,
    SolveOptions,
    WeightedTrajectory,
    check_global_certificate,
    classical_reduction_solve,
    compile_rhs,
    continue_solution,
    envelope_bound,
    estimate_L,
    evaluate,
    gronwall_bound,
    katugampola_integral,
    linear_solution,
    local_radius,
    mittag_leffler,
    parse,
    picard_solve,
    stitched_residual,
)

crit = pytest.mark.criterion

RHS_SINGULAR = "sin(1 + t^(2/3) * x^2) / t^(1/3)"
RHS_CUTOFF = "exp(-t^2 * x * sin(t)) / (sqrt(t) * (1 - t))"


def singular_problem():
    p = FhkParams(0.5, 1 / 3, 0.5)
    return CauchyProblem(p, math.sqrt(math.pi) / 2, compile_rhs(RHS_SINGULAR), lam=1 / 3, horizon=1.0)


def cutoff_problem(horizon=0.9):
    p = FhkParams(0.5, 0.25, 2.0)
    return CauchyProblem(p, 1.0, compile_rhs(RHS_CUTOFF), lam=0.5, horizon=horizon)


# 1 ---------------------------------------------------------------------------

@crit(1)
def test_power_rule_constant():
    t0 = time.perf_counter()
    errs = []
    for N in (128, 256, 512):
        grid = SGrid.uniform(1.0, N, 2.0)
        got = katugampola_integral(0.5, 2.0, grid, np.ones(N + 1))
        exact = (grid.t**2 / 2) ** 0.5 / G(1.5)
        errs.append(float(np.max(np.abs(got - exact))))
    assert errs[-1] <= 1e-4
    # product integration is exact for constants: the error sits at round-off,
    # so no finite observed order is smaller than what the data show
    assert max(errs) <= 1e-14
    assert time.perf_counter() - t0 <= 5.0


@crit(1)
def test_power_rule_richardson_slope():
    vals = []
    for N in (128, 256, 512):
        grid = SGrid.uniform(1.0, N, 2.0)
        vals.append(katugampola_integral(0.5, 2.0, grid, np.cos(grid.t))[-1])
    slope = math.log2(abs(vals[0] - vals[1]) / abs(vals[1] - vals[2]))
    assert slope >= 1.4


# 2 ---------------------------------------------------------------------------

@crit(2)
@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_semigroup(rho):
    grid = SGrid.graded(1.0, 512, rho, grade=2.0)
    f = np.cos(grid.t)
    inner = katugampola_integral(0.4, rho, grid, f)
    lhs = katugampola_integral(0.3, rho, grid, inner)
    rhs = katugampola_integral(0.7, rho, grid, f)
    assert np.max(np.abs(lhs - rhs)) <= 1e-3


# 3 ---------------------------------------------------------------------------

@crit(3)
def test_linear_oracle_lattice():
    t0 = time.perf_counter()
    worst = 0.0
    for lam in (-1.0, 1.0):
        for a in (0.3, 0.5, 0.7):
            for b in (0.0, 0.5, 1.0):
                for rho in (0.5, 1.0, 2.0):
                    p = FhkParams(a, b, rho)
                    T = rho ** (1 / rho)  # unit horizon in s
                    prob = CauchyProblem(p, 1.0, lambda t, x, lam=lam: lam * x,
                                         lam=rho * (1 - p.gamma), horizon=T)
                    rep = picard_solve(prob, SolveOptions(N=512, grade=3.0, tol=1e-12, max_iter=400))
                    assert rep.converged, (a, b, rho, lam)
                    ref = linear_solution(p, 1.0, lam, rep.traj.grid)
                    worst = max(worst, float(np.max(np.abs(rep.traj.y - ref.y))))
    assert worst <= 1e-3
    assert time.perf_counter() - t0 <= 60.0


# 4 ---------------------------------------------------------------------------

@crit(4)
@pytest.mark.parametrize("a,b,rho", [(0.5, 0.0, 1.0), (0.3, 0.5, 2.0), (0.7, 1.0, 0.5), (0.5, 1 / 3, 0.5)])
def test_homogeneous_exact(a, b, rho):
    p = FhkParams(a, b, rho)
    prob = CauchyProblem(p, 2.5, lambda t, x: 0.0 * x, lam=0.0, horizon=1.0)
    rep = picard_solve(prob, SolveOptions(N=64))
    assert rep.converged and rep.iterations <= 2
    assert np.max(np.abs(rep.traj.y - 2.5 / G(p.gamma))) <= 1e-12


# 5 ---------------------------------------------------------------------------

@crit(5)
def test_caputo_reduction():
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: -x, lam=0.0, horizon=1.0)
    rep = picard_solve(prob, SolveOptions(N=512))
    assert rep.converged
    t = rep.traj.t
    exact = mittag_leffler(0.5, 1.0, -np.sqrt(t))
    assert np.max(np.abs(rep.traj.x - exact)) <= 1e-3


# 6 ---------------------------------------------------------------------------

@crit(6)
def test_local_existence_singular_rhs():
    t0 = time.perf_counter()
    prob = singular_problem()
    k = 1.0
    grid = SGrid.graded(prob.horizon, 512, prob.params.rho, 2.0)
    L = estimate_L(prob, k, grid)
    assert 0.5 <= L <= 1.0
    h = local_radius(k, L, 1 / 3, prob.params, prob.horizon)
    assert h > 0
    rep = picard_solve(prob, SolveOptions(N=512, k=k), interval=h, keep_history=True)
    assert rep.converged and rep.residual <= 1e-8
    y0 = prob.x0_vec[0] / G(prob.params.gamma)
    for y in rep.history:
        assert np.max(np.abs(y - y0)) <= k
    assert time.perf_counter() - t0 <= 10.0


# 7 ---------------------------------------------------------------------------

@crit(7)
def test_continuation_to_0_9():
    prob = cutoff_problem()
    loc = picard_solve(prob, SolveOptions(N=256, grade=2.0), interval=0.1)
    assert loc.converged
    rep = continue_solution(prob, loc, ContinuationOptions(target_T=0.9))
    assert rep.classification == "reached_target"
    assert rep.traj.t[-1] >= 0.9 * (1 - 1e-12)
    assert stitched_residual(prob, rep.traj) <= 1e-6

    # |phi| <= 1/(sqrt(t)(1-t)) while x sin t >= 0
    x = rep.traj.x[1:]
    assert np.all(x > 0)
    bound = envelope_bound(prob, rep.traj, lambda t: 1.0 / (np.sqrt(t) * (1.0 - t)))
    assert np.all(bound >= np.abs(rep.traj.y))


# 8 ---------------------------------------------------------------------------

@crit(8)
def test_blowup_quadratic_riemann_liouville():
    # taken literally; see the notes on well-posedness of this case
    p = FhkParams(0.5, 0.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: x**2, lam=0.5, horizon=10.0)
    loc = picard_solve(prob, SolveOptions(N=128, grade=2.0), interval=0.05)
    assert loc.converged, loc.message
    rep = continue_solution(prob, loc, ContinuationOptions(target_T=10.0))
    assert rep.classification == "suspected_blowup"
    assert rep.phi_t[-1] < 10.0
    assert np.all(np.diff(rep.phi_trace[-10:]) > 0)


@crit(8)
def test_decay_reaches_target():
    p = FhkParams(0.5, 0.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: -x, lam=0.5, horizon=10.0)
    loc = picard_solve(prob, SolveOptions(N=128, grade=2.0), interval=0.05)
    assert loc.converged
    rep = continue_solution(prob, loc, ContinuationOptions(target_T=10.0))
    assert rep.classification == "reached_target"
    assert rep.traj.t[-1] >= 10.0 * (1 - 1e-12)


# 9 ---------------------------------------------------------------------------

@crit(9)
def test_gronwall_dominates_linear():
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: x, lam=0.0, horizon=1.0)
    rep = picard_solve(prob, SolveOptions(N=512))
    assert rep.converged
    cert = check_global_certificate(prob, lambda t: 1.0 + 0 * t, lambda u: u, lambda t: 0 * t, rep.traj)
    assert cert.holds and cert.dominates
    # g = 1, f = id is tight for phi = x: bound and solution tie up to rounding
    y = np.abs(rep.traj.y)
    assert np.all(cert.bound_trace >= y - 1e-12 * np.maximum(1.0, y))


@crit(9)
def test_gronwall_dominates_strictly_when_envelope_is_loose():
    p = FhkParams(0.5, 1.0, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: 0.5 * x, lam=0.0, horizon=1.0)
    rep = picard_solve(prob, SolveOptions(N=512))
    cert = check_global_certificate(prob, lambda t: 1.0 + 0 * t, lambda u: u, lambda t: 0 * t, rep.traj)
    assert cert.holds and cert.dominates
    assert np.all(cert.bound_trace[1:] > np.abs(rep.traj.y[1:]))


@crit(9)
def test_gronwall_mittag_leffler_closed_form():
    grid = SGrid.uniform(1.0, 512, 1.0)
    B = gronwall_bound(np.ones(513), 1.0, 0.5, grid)
    exact = mittag_leffler(0.5, 1.0, G(0.5))
    assert abs(B[-1] - exact) <= 0.05 * exact


# 10 --------------------------------------------------------------------------

@crit(10)
def test_radius_formula():
    p = FhkParams(0.5, 0.0, 1.0)
    assert abs(local_radius(1.0, 1.0, 0.0, p, 10.0) - math.sqrt(math.pi) / 2) <= 1e-12
    hs = [local_radius(1.0, L, 0.0, p, 10.0) for L in (1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(hs, hs[1:]))


# 11 --------------------------------------------------------------------------

@crit(11)
def test_parser_example_rhs_bit_equal():
    rng = np.random.default_rng(20261015)
    e_sing, e_cut = parse(RHS_SINGULAR), parse(RHS_CUTOFF)

    def h31(t, x):
        return math.sin(1 + t ** (2 / 3) * x**2) / t ** (1 / 3)

    def h41(t, x):
        return math.exp(-t**2 * x * math.sin(t)) / (math.sqrt(t) * (1 - t))

    for _ in range(100):
        t = float(rng.uniform(1e-6, 0.999))
        x = float(rng.uniform(-5.0, 5.0))
        assert evaluate(e_sing, {"t": t, "x": x}) == h31(t, x)
        assert evaluate(e_cut, {"t": t, "x": x}) == h41(t, x)


@crit(11)
def test_parser_precedence():
    assert evaluate(parse("2+3*4"), {}) == 14
    assert evaluate(parse("2^3^2"), {}) == 512
    assert evaluate(parse("-2^2"), {}) == -4


# 12 --------------------------------------------------------------------------

@crit(12)
@pytest.mark.parametrize("beta,lam", [(0.0, 0.5), (1.0, 0.0)])
def test_cross_path(beta, lam):
    p = FhkParams(0.5, beta, 1.0)
    prob = CauchyProblem(p, 1.0, lambda t, x: -x + t, lam=lam, horizon=1.0)
    rep = picard_solve(prob, SolveOptions(N=128, tol=1e-13, max_iter=400))
    assert rep.converged
    direct = classical_reduction_solve(prob, rep.traj.t)
    assert isinstance(direct, WeightedTrajectory)
    assert np.max(np.abs(direct.y - rep.traj.y)) <= 1e-10
