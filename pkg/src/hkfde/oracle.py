"""Reference solutions used to cross-check the solver.

* Mittag-Leffler series with an explicit tail bound.
* The closed-form solution of the linear problem ``phi = lam * x``.
* An independent direct-``t`` solver for ``rho = 1`` and ``beta`` in {0, 1}
  whose quadrature moments come from ``scipy.integrate.quad``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate

from .errors import ParameterDomainError, RegimeError, RhsEvaluationError
from .fracore import CauchyProblem, FhkParams, SGrid, WeightedTrajectory

__all__ = [
    "MLSeries",
    "ml_series",
    "mittag_leffler",
    "linear_solution",
    "classical_reduction_solve",
]

Z_MAX = 50.0
_SMALL = 1e-16
_TAIL_TARGET = 1e-12


@dataclass(frozen=True)
class MLSeries:
    a: float
    b: float
    z: float
    value: float
    truncation: int
    tail_bound: float


def _log_term(a, b, k, logz):
    return k * logz - math.lgamma(a * k + b)


def _tail(a, b, z, k):
    """Bound on ``sum_{j>=k} |z|**j / Gamma(a j + b)``.

    Gamma is log-convex, so the term ratios ``|z| Gamma(aj+b)/Gamma(aj+a+b)``
    decrease in ``j``; once the ratio at ``k`` is below 1 the tail is
    dominated by a geometric series.
    """
    az = abs(z)
    if az == 0.0:
        return 0.0
    lz = math.log(az)
    r = math.exp(lz + math.lgamma(a * k + b) - math.lgamma(a * k + a + b))
    if r >= 1.0:
        return math.inf
    return math.exp(_log_term(a, b, k, lz)) / (1.0 - r)


def _series_float(a, b, z):
    total = 0.0
    biggest = 0.0
    small_run = 0
    k = 0
    while True:
        if z == 0.0:
            term = 1.0 / math.gamma(b) if k == 0 else 0.0
        elif a * k + b < 170.0 and k * math.log(abs(z)) < 700.0:
            term = z**k / math.gamma(a * k + b)
        else:
            term = math.exp(_log_term(a, b, k, math.log(abs(z))))
            if z < 0 and k % 2:
                term = -term
        total += term
        biggest = max(biggest, abs(term))
        k += 1
        small_run = small_run + 1 if abs(term) < _SMALL * (abs(total) + 1.0) else 0
        if small_run >= 3:
            tail = _tail(a, b, z, k)
            if tail < _TAIL_TARGET:
                return total, k, tail, biggest


def _log10_peak(a, b, z):
    lz = math.log(abs(z))
    k, best = 0, -math.inf
    while True:
        v = _log_term(a, b, k, lz)
        if v < best:
            return best / math.log(10.0)
        best, k = v, k + 1


def _series_mp(a, b, z, log10_peak):
    digits = 20 + max(int(log10_peak), 0)
    if digits > 2000:
        raise RegimeError(f"E_{{{a},{b}}}({z}) needs {digits} digits of working precision")
    with mpmath.workdps(digits):
        za, aa, bb = mpmath.mpf(z), mpmath.mpf(a), mpmath.mpf(b)
        total = mpmath.mpf(0)
        small_run = 0
        k = 0
        while True:
            term = za**k / mpmath.gamma(aa * k + bb)
            total += term
            k += 1
            small_run = small_run + 1 if abs(term) < _SMALL * (abs(total) + 1) else 0
            if small_run >= 3:
                tail = _tail(a, b, z, k)
                if tail < _TAIL_TARGET:
                    return float(total), k, tail


def ml_series(a: float, b: float, z: float) -> MLSeries:
    """Two-parameter Mittag-Leffler ``E_{a,b}(z) = sum_k z**k / Gamma(a k + b)``.

    Summation stops once three consecutive terms fall below
    ``1e-16 * (|sum| + 1)`` and the tail bound is below ``1e-12``. When the
    alternating series for negative ``z`` would lose more than one digit
    to cancellation it is re-summed in extended precision.
    """
    if not (a > 0 and b > 0):
        raise ParameterDomainError(f"Mittag-Leffler parameters a={a!r}, b={b!r} must be positive")
    z = float(z)
    if not abs(z) <= Z_MAX:
        raise RegimeError(f"|z|={abs(z)!r} exceeds the series regime |z|<={Z_MAX}")
    try:
        value, k, tail, biggest = _series_float(a, b, z)
    except OverflowError:
        if z > 0:
            raise RegimeError(f"E_{{{a},{b}}}({z}) overflows double precision") from None
        value, biggest = 0.0, math.inf
    if z < 0 and biggest > 10.0 * abs(value):
        value, k, tail = _series_mp(a, b, z, _log10_peak(a, b, z))
    return MLSeries(a, b, z, value, k, tail)


def mittag_leffler(a: float, b: float, z):
    """Value of ``E_{a,b}(z)``; ``z`` may be a scalar or an array."""
    if np.ndim(z) == 0:
        return ml_series(a, b, float(z)).value
    z = np.asarray(z, dtype=float)
    return np.array([ml_series(a, b, v).value for v in z.ravel()]).reshape(z.shape)


def linear_solution(params: FhkParams, x0: float, lam: float, grid: SGrid) -> WeightedTrajectory:
    """Weighted solution of ``phi = lam * x``: ``y = x0 * E_{alpha,gamma}(lam * s**alpha)``."""
    if grid.rho != params.rho:
        raise ParameterDomainError("grid and params disagree on rho")
    z = lam * grid.nodes**params.alpha
    y = x0 * mittag_leffler(params.alpha, params.gamma, z)
    return WeightedTrajectory(params, grid, y)


# -- direct t-path for rho = 1 ---------------------------------------------

def _moments(t, n, alpha, mu):
    """Hat-function moments of ``(t_n - tau)**(alpha-1) * tau**(-mu)`` on ``[0, t_n]``."""
    tn = t[n]
    w = np.zeros(n + 1)
    for j in range(n):
        a, b = t[j], t[j + 1]
        left = mu > 0 and j == 0
        right = alpha < 1 and j + 1 == n
        if left or right:
            ea = -mu if left else 0.0
            eb = alpha - 1.0 if right else 0.0

            def f_lo(tau, a=a, b=b, left=left, right=right):
                v = (b - tau) / (b - a)
                if not right:
                    v *= (tn - tau) ** (alpha - 1.0)
                if not left and mu > 0:
                    v *= tau ** (-mu)
                return v

            def f_hi(tau, a=a, b=b, left=left, right=right):
                v = (tau - a) / (b - a)
                if not right:
                    v *= (tn - tau) ** (alpha - 1.0)
                if not left and mu > 0:
                    v *= tau ** (-mu)
                return v

            lo = integrate.quad(f_lo, a, b, weight="alg", wvar=(ea, eb), epsabs=0, epsrel=2e-14, limit=200)[0]
            hi = integrate.quad(f_hi, a, b, weight="alg", wvar=(ea, eb), epsabs=0, epsrel=2e-14, limit=200)[0]
        else:

            def k(tau):
                return (tn - tau) ** (alpha - 1.0) * tau ** (-mu)

            lo = integrate.quad(lambda tau: k(tau) * (b - tau) / (b - a), a, b, epsabs=0, epsrel=2e-14, limit=200)[0]
            hi = integrate.quad(lambda tau: k(tau) * (tau - a) / (b - a), a, b, epsabs=0, epsrel=2e-14, limit=200)[0]
        w[j] += lo
        w[j + 1] += hi
    return w


def classical_reduction_solve(problem: CauchyProblem, t_nodes, tol: float = 1e-13,
                              max_iter: int = 200) -> WeightedTrajectory:
    """Solve a ``rho = 1``, ``beta`` in {0, 1} problem directly in ``t``.

    The Abel equation ``x(t) = x0 t**(g-1)/Gamma(g) + (1/Gamma(a)) int_0^t (t-tau)**(a-1) phi dtau``
    is marched node by node; the implicit value at each node is found by
    fixed-point iteration to ``tol``. Node 0 uses the same ``1e-3 * t_1``
    probe as the general solver. Scalar problems only.
    """
    p = problem.params
    if p.rho != 1.0 or p.beta not in (0.0, 1.0):
        raise ParameterDomainError("the classical path needs rho=1 and beta in {0, 1}")
    if problem.is_system:
        raise ParameterDomainError("the classical path handles scalar problems only")
    t = np.asarray(t_nodes, dtype=float)
    grid = SGrid(t, 1.0)
    a, g = p.alpha, p.gamma
    lam = float(problem.lam_vec[0])
    x0 = float(problem.x0_vec[0])
    y0 = x0 / math.gamma(g)

    def M(tt, yy):
        xx = yy if g == 1.0 else tt ** (g - 1.0) * yy
        try:
            v = float(np.asarray(problem.rhs(np.array([tt]), np.array([xx])), dtype=float).ravel()[0])
        except Exception as exc:
            raise RhsEvaluationError(f"rhs failed: {exc}", t=tt, x=xx) from exc
        return tt**lam * v

    n_nodes = t.size
    y = np.empty(n_nodes)
    Mv = np.empty(n_nodes)
    y[0] = y0
    if lam == 0.0 and g == 1.0:
        Mv[0] = M(0.0, y0)
    else:
        Mv[0] = M(1e-3 * t[1], y0)
    for n in range(1, n_nodes):
        w = _moments(t, n, a, lam)
        c = t[n] ** (1.0 - g) / math.gamma(a)
        known = c * float(np.dot(w[:n], Mv[:n]))
        yn = y[n - 1]
        for _ in range(max_iter):
            m = M(t[n], yn)
            new = y0 + known + c * w[n] * m
            if abs(new - yn) <= tol:
                yn = new
                break
            yn = new
        y[n] = yn
        Mv[n] = M(t[n], yn)
    return WeightedTrajectory(p, grid, y)
