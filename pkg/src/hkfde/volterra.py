"""Volterra form of the Cauchy problem and its Picard solver.

With ``y = s**(1-gamma) x`` the problem is equivalent to

    y(s) = x0/Gamma(gamma) + s**(1-gamma)/Gamma(alpha) * int_0^s (s-w)**(alpha-1) phi(t(w), x(w)) dw.

The integrand is sampled as ``M = t**lam * phi`` (bounded near ``t = 0``)
and the factor ``t**(-lam) = rho**(-lam/rho) * w**(-lam/rho)`` goes into the
quadrature kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import IncompatibleInputError, ParameterDomainError, RhsEvaluationError
from .fracore import CauchyProblem, FhkParams, SGrid, WeightedTrajectory
from .quadrature import build_weights

__all__ = [
    "SolveOptions",
    "SolveReport",
    "volterra_rhs",
    "fixed_point_residual",
    "picard_solve",
    "picard_solve_system",
    "local_radius",
    "local_radius_printed",
    "estimate_L",
    "default_k",
]

PROBE = 1e-3  # node-0 probe at PROBE * t_1


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 200
    N: int = 512
    # grid nodes S*(j/N)**grade; grade > 1 resolves the s**alpha layer at 0
    grade: float = 1.0
    # ball radius for the radius/excursion bookkeeping; None -> default_k
    k: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterDomainError(f"tol={self.tol!r} must be positive")
        if self.max_iter < 1:
            raise ParameterDomainError("max_iter must be >= 1")
        if self.N < 8:
            raise ParameterDomainError(f"N={self.N!r} must be >= 8")
        if not self.grade >= 1.0:
            raise ParameterDomainError("grade must be >= 1")


@dataclass
class SolveReport:
    traj: WeightedTrajectory
    iterations: int
    residual: float
    converged: bool
    h_local: Optional[float] = None
    L: Optional[float] = None
    k: Optional[float] = None
    # largest |y - x0/Gamma(gamma)| seen over all iterates
    max_excursion: float = 0.0
    interval: float = 0.0
    history: list = field(default_factory=list, repr=False)
    message: str = ""


def default_k(problem: CauchyProblem) -> float:
    return max(1.0, float(np.max(np.abs(problem.x0_vec))) / math.gamma(problem.params.gamma))


def _locate_failure(rhs, t, x, system):
    """First grid point at which ``rhs`` raises, by point-wise re-evaluation."""
    x = np.asarray(x, dtype=float)
    cols = x.shape[-1] if x.ndim else 1
    tb = np.broadcast_to(np.asarray(t, dtype=float), x.shape[-1:] if x.ndim else ())
    for j in range(cols):
        tj = tb[j:j + 1] if tb.ndim else tb
        xj = x[..., j:j + 1] if x.ndim else x
        try:
            with np.errstate(all="ignore"):
                rhs(tj, xj)
        except Exception:
            xv = xj[..., 0] if x.ndim else xj
            xv = tuple(float(v) for v in xv) if system else float(xv)
            return float(np.ravel(tj)[0]), xv
    return (float(np.ravel(t)[0]) if np.size(t) else None), None


def _call_rhs(rhs: Callable, t, x, system: bool):
    try:
        with np.errstate(all="ignore"):
            out = np.asarray(rhs(t, x), dtype=float)
    except RhsEvaluationError:
        raise
    except Exception as exc:  # user code: report where it failed
        tt, xx = _locate_failure(rhs, t, x, system)
        raise RhsEvaluationError(f"rhs failed: {exc}", t=tt, x=xx) from exc
    try:
        out = np.broadcast_to(out, np.shape(x))
    except ValueError:
        raise RhsEvaluationError(f"rhs returned shape {out.shape}, expected {np.shape(x)}")
    bad = ~np.isfinite(out)
    if bad.any():
        idx = np.argwhere(bad)[0]
        tb = np.broadcast_to(t, np.shape(x))[tuple(idx)]
        xb = np.asarray(x)[tuple(idx)]
        raise RhsEvaluationError("rhs returned a non-finite value", t=float(tb), x=float(xb))
    return out


class _Integrand:
    """Samples of ``t**lam * phi(t, x)`` on a grid, node 0 by probing."""

    def __init__(self, problem: CauchyProblem, t: np.ndarray, s: np.ndarray):
        p = problem.params
        self.problem = problem
        self.system = problem.is_system
        self.gamma = p.gamma
        self.lam = problem.lam_vec[:, None] if self.system else float(problem.lam_vec[0])
        self.t = t
        self.s = s
        with np.errstate(divide="ignore"):
            self.sw = s ** (self.gamma - 1.0)
        lam_max = float(np.max(problem.lam_vec))
        self.direct0 = lam_max == 0.0 and self.gamma == 1.0
        if not self.direct0:
            self.tp = PROBE * t[1]
            self.sp = p.to_s(self.tp)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        rhs = self.problem.rhs
        t, s = self.t, self.s
        x = self.sw[1:] * y[..., 1:]
        M = np.empty_like(y)
        M[..., 1:] = t[1:] ** self.lam * _call_rhs(rhs, t[1:], x, self.system)
        if self.direct0:
            M[..., 0] = _call_rhs(rhs, 0.0, y[..., :1], self.system)[..., 0]
        else:
            xp = self.sp ** (self.gamma - 1.0) * y[..., :1]
            tp = np.array([self.tp])
            M[..., 0] = (self.tp ** np.squeeze(self.lam)) * _call_rhs(rhs, tp, xp, self.system)[..., 0]
        return M


class _VolterraMap:
    """The map ``y -> x0/Gamma(gamma) + s**(1-gamma)/Gamma(alpha) * rho**(-mu) * W M(y)``."""

    def __init__(self, problem: CauchyProblem, grid: SGrid):
        p = problem.params
        if grid.rho != p.rho:
            raise IncompatibleInputError("grid and problem disagree on rho")
        self.problem = problem
        self.grid = grid
        self.integrand = _Integrand(problem, grid.t, grid.nodes)
        lam = problem.lam_vec
        mus = np.unique(lam / p.rho)
        self.W = {mu: build_weights(p.alpha, grid, float(mu)).w for mu in mus}
        self.mu = lam / p.rho
        self.scale = grid.nodes ** (1.0 - p.gamma) / math.gamma(p.alpha)
        self.y0 = problem.x0_vec / math.gamma(p.gamma)
        if not problem.is_system:
            self.y0 = float(self.y0[0])

    def __call__(self, y: np.ndarray) -> np.ndarray:
        p = self.problem.params
        M = self.integrand(y)
        if self.problem.is_system:
            out = np.empty_like(y)
            for i, mu in enumerate(self.mu):
                out[i] = self.y0[i] + self.scale * p.rho ** (-mu) * (self.W[mu] @ M[i])
            return out
        mu = float(self.mu[0])
        return self.y0 + self.scale * p.rho ** (-mu) * (self.W[mu] @ M)


def volterra_rhs(problem: CauchyProblem, traj: WeightedTrajectory) -> WeightedTrajectory:
    """One application of the Volterra operator to a weighted trajectory."""
    if traj.params != problem.params:
        raise IncompatibleInputError("trajectory and problem disagree on the orders")
    if traj.t[-1] > problem.horizon * (1 + 1e-12):
        raise IncompatibleInputError("trajectory extends beyond the problem horizon")
    A = _VolterraMap(problem, traj.grid)
    return traj.with_y(A(np.asarray(traj.y)))


def fixed_point_residual(problem: CauchyProblem, traj: WeightedTrajectory) -> float:
    """Weighted sup distance between ``traj`` and its Volterra image."""
    A = _VolterraMap(problem, traj.grid)
    return float(np.max(np.abs(A(np.asarray(traj.y)) - traj.y)))


def _interval_end(problem: CauchyProblem, interval) -> float:
    if interval is None:
        return problem.horizon
    h = float(interval[1] if np.ndim(interval) else interval)
    if not h > 0:
        raise ParameterDomainError(f"interval end {h!r} must be positive")
    if h > problem.horizon * (1 + 1e-12):
        raise ParameterDomainError(f"interval end {h} exceeds horizon {problem.horizon}")
    return h


def _solve(problem, opts, interval, y_init, keep_history):
    opts = opts or SolveOptions()
    h = _interval_end(problem, interval)
    grid = SGrid.graded(h, opts.N, problem.params.rho, opts.grade)
    A = _VolterraMap(problem, grid)
    shape = (problem.dim, len(grid)) if problem.is_system else (len(grid),)
    anchor = np.broadcast_to(np.reshape(A.y0, (-1, 1)) if problem.is_system else A.y0, shape)
    y = np.array(anchor if y_init is None else np.broadcast_to(y_init, shape), dtype=float)

    excursion = float(np.max(np.abs(y - anchor)))
    residual = np.inf
    converged = False
    history = [y.copy()] if keep_history else []
    it = 0
    message = ""
    y_prev = None
    while it < opts.max_iter:
        try:
            y_new = A(y)
        except RhsEvaluationError as exc:
            if it == 0:
                raise
            # an iterate left the domain of phi: the iteration is diverging
            residual, message = np.inf, f"iteration diverged: {exc}"
            break
        it += 1
        if not np.all(np.isfinite(y_new)):
            residual, message = np.inf, "iteration diverged: non-finite iterate"
            break
        excursion = max(excursion, float(np.max(np.abs(y_new - anchor))))
        if keep_history:
            history.append(y_new.copy())
        residual = float(np.max(np.abs(y_new - y)))
        if residual <= opts.tol:
            # y is returned, so residual is exactly its own fixed-point defect
            converged = True
            break
        if y_prev is not None and np.array_equal(y_new, y_prev):
            # amplified rounding has locked into a 2-cycle; more sweeps cannot help
            message = f"iteration stagnated in a 2-cycle at residual {residual:.3g}"
            break
        y_prev, y = y, y_new
    k = opts.k if opts.k is not None else default_k(problem)
    L = None
    h_local = None
    try:
        Lv = _estimate_L_vec(problem, k, SGrid.graded(problem.horizon, opts.N, problem.params.rho, opts.grade))
        L = float(np.max(Lv))
        h_local = float(min(local_radius(k, Li, lam, problem.params, problem.horizon)
                            for Li, lam in zip(Lv, problem.lam_vec)))
    except (ParameterDomainError, RhsEvaluationError):
        pass
    return SolveReport(
        traj=WeightedTrajectory(problem.params, grid, y),
        iterations=it,
        residual=residual,
        converged=converged,
        h_local=h_local,
        L=L,
        k=k,
        max_excursion=excursion,
        interval=h,
        history=history,
        message=message or ("" if converged else "iteration cap reached"),
    )


def picard_solve(problem: CauchyProblem, opts: SolveOptions | None = None, interval=None,
                 *, y_init=None, keep_history: bool = False) -> SolveReport:
    """Successive approximation of the Volterra equation on ``[0, interval]``.

    Starts from ``y = x0/Gamma(gamma)`` unless ``y_init`` is given. The
    returned trajectory is the last iterate whose image was computed, so
    ``report.residual`` is its fixed-point defect. Non-convergence is
    reported through ``converged=False``.
    """
    return _solve(problem, opts, interval, y_init, keep_history)


def picard_solve_system(problem: CauchyProblem, opts: SolveOptions | None = None, interval=None,
                        *, y_init=None, keep_history: bool = False) -> SolveReport:
    """As :func:`picard_solve` for a vector ``x0``; ``y`` has shape ``(n, N+1)``.

    ``h_local`` is the minimum of the component radii.
    """
    if not problem.is_system:
        problem = CauchyProblem(problem.params, problem.x0_vec, _lift(problem.rhs),
                                problem.lam_vec, problem.horizon)
    return _solve(problem, opts, interval, y_init, keep_history)


def _lift(rhs):
    def lifted(t, x):
        return np.asarray(rhs(t, x[0]), dtype=float)[None, ...] * np.ones_like(x)

    return lifted


def local_radius(k: float, L: float, lam: float, params: FhkParams, T: float) -> float:
    """Length ``h`` of ``[0, h]`` on which the Volterra map keeps the ``k``-ball invariant.

    ``h = min{(k rho**(a-g+1) Gamma(a+1-lam/rho) / (L Gamma(1-lam/rho)))**(1/(rho(a-g+1)-lam)), T}``
    where ``a = alpha`` and ``g = gamma``. At ``rho = 1`` this is the
    classical radius; see :func:`local_radius_printed` for the form whose
    exponent keeps ``lam`` unscaled.
    """
    a, g, rho = params.alpha, params.gamma, params.rho
    if not k > 0:
        raise ParameterDomainError(f"ball radius k={k!r} must be positive")
    if not L >= 0:
        raise ParameterDomainError(f"bound L={L!r} must be nonnegative")
    if not T > 0:
        raise ParameterDomainError(f"horizon T={T!r} must be positive")
    if not 0.0 <= lam < rho:
        raise ParameterDomainError(f"lam={lam!r} violates 0<=lam<rho")
    e = rho * (a - g + 1.0) - lam
    if not e > 0:
        raise ParameterDomainError(f"exponent rho*(alpha-gamma+1)-lam={e!r} must be positive")
    if L == 0:
        return float(T)
    mu = lam / rho
    base = k * rho ** (a - g + 1.0) * math.gamma(a + 1.0 - mu) / (L * math.gamma(1.0 - mu))
    return float(min(base ** (1.0 / e), T))


def local_radius_printed(k: float, L: float, lam: float, params: FhkParams, T: float) -> float:
    """``min{(k rho**(a-g+1) Gamma(a-lam+1) / (L Gamma(1-lam)))**(1/(rho(a-g-lam+1))), T}``.

    Agrees with :func:`local_radius` at ``rho = 1`` or ``lam = 0``.
    """
    a, g, rho = params.alpha, params.gamma, params.rho
    if not (k > 0 and L > 0 and T > 0):
        raise ParameterDomainError("k, L and T must be positive")
    if not 0.0 <= lam < 1.0:
        raise ParameterDomainError(f"lam={lam!r} violates 0<=lam<1")
    e = a - g - lam + 1.0
    if not e > 0:
        raise ParameterDomainError(f"exponent alpha-gamma-lam+1={e!r} must be positive")
    base = k * rho ** (a - g + 1.0) * math.gamma(a - lam + 1.0) / (L * math.gamma(1.0 - lam))
    return float(min(base ** (1.0 / (rho * e)), T))


def _estimate_L_vec(problem: CauchyProblem, k: float, grid: SGrid) -> np.ndarray:
    p = problem.params
    n = problem.dim
    y0 = problem.x0_vec / math.gamma(p.gamma)
    offsets = np.array([-k, 0.0, k])
    if 3**n <= 729:
        mesh = np.stack(np.meshgrid(*([offsets] * n), indexing="ij"), axis=0).reshape(n, -1)
    else:
        mesh = np.tile(offsets, (n, 1))
    Y = y0[:, None] + mesh  # (n, m) sample points
    t = grid.t.copy()
    s = grid.nodes.copy()
    t[0] = PROBE * t[1]
    s[0] = p.to_s(t[0])
    lam = problem.lam_vec
    T = np.repeat(t, Y.shape[1])
    S = np.repeat(s, Y.shape[1])
    X = np.tile(Y, (1, t.size)) * S ** (p.gamma - 1.0)
    if problem.is_system:
        F = _call_rhs(problem.rhs, T, X, True)
    else:
        F = _call_rhs(problem.rhs, T, X[0], False)[None, :]
    return np.max(np.abs(T[None, :] ** lam[:, None] * F), axis=1)


def estimate_L(problem: CauchyProblem, k: float, grid: SGrid) -> float:
    """Sampled estimate of ``sup |t**lam phi(t, x)|`` over the ``k``-ball.

    Weighted values ``x0/Gamma(gamma) + {-k, 0, k}`` (all combinations for a
    system) are tried at every node; node 0 is replaced by the usual probe.
    The result is the largest value found, not a certified bound.
    """
    if not k > 0:
        raise ParameterDomainError(f"ball radius k={k!r} must be positive")
    return float(np.max(_estimate_L_vec(problem, k, grid)))
