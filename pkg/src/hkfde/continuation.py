"""Continuation of a local solution, blow-up screening and Gronwall bounds.

A local solution on ``(0, mu]`` is extended step by step. Each step

1. evaluates the tail forcing ``x1`` (homogeneous term plus the history
   integral over ``(0, mu]``) on ``[mu, mu+1]``,
2. samples ``Theta = max |phi|`` on a 17 x 17 lattice over the tube
   ``|x - x1(t)| <= k`` above that window, the set the step map has to
   keep invariant,
3. advances ``s`` by ``(k Gamma(alpha+1) / Theta)**(1/alpha)``,
4. solves the discrete Volterra equation on the new nodes with the history
   frozen, marching node by node with fixed-point iteration.

The history sum reuses stored integrand samples, so the stitched trajectory
satisfies the same discrete equation as a solve over the whole grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import CertificateInputError, ParameterDomainError, RegimeError, RhsEvaluationError
from .fracore import CauchyProblem, SGrid, WeightedTrajectory
from .quadrature import build_weights, row_weights
from .volterra import PROBE, SolveReport, _call_rhs

__all__ = [
    "ContinuationOptions",
    "StepRecord",
    "ContinuationReport",
    "continue_solution",
    "blowup_functional",
    "gronwall_bound",
    "CertificateReport",
    "check_global_certificate",
    "envelope_bound",
    "stitched_residual",
]

LATTICE = 17


@dataclass(frozen=True)
class ContinuationOptions:
    k_step: Optional[float] = None  # None: max(1, max|x1|) recomputed every step
    max_steps: int = 2000
    blowup_threshold: float = 1e8
    target_T: float = math.inf
    nodes_per_step: int = 8
    tol: float = 1e-10  # per node, relative to max(1, |y|)
    max_iter: int = 200
    trailing: int = 10

    def __post_init__(self):
        if not self.blowup_threshold > 0:
            raise ParameterDomainError("blowup_threshold must be positive")
        if self.max_steps < 1:
            raise ParameterDomainError("max_steps must be >= 1")
        if self.k_step is not None and not self.k_step > 0:
            raise ParameterDomainError("k_step must be positive")
        if not self.target_T > 0:
            raise ParameterDomainError("target_T must be positive")
        if self.nodes_per_step < 1 or self.trailing < 1:
            raise ParameterDomainError("nodes_per_step and trailing must be >= 1")


@dataclass
class StepRecord:
    t_start: float
    t_end: float
    h_step: float  # t_end - t_start
    h_formula: float  # min{(k rho**alpha Gamma(alpha+1)/Theta)**(1/(rho alpha)), 1}
    theta: float
    k: float
    iterations: int
    residual: float
    converged: bool
    nodes: int


@dataclass
class ContinuationReport:
    traj: WeightedTrajectory
    steps: List[StepRecord]
    classification: str  # reached_target | suspected_blowup | stalled
    phi_trace: np.ndarray
    phi_t: np.ndarray
    bound_trace: Optional[np.ndarray] = None
    message: str = ""

    @property
    def mu_est(self) -> float:
        return float(self.traj.t[-1])


def blowup_functional(traj: WeightedTrajectory) -> np.ndarray:
    """``|Phi(t)| = sqrt(t**2 + |x(t)|**2)`` at every node (NaN at 0 when ``gamma < 1``)."""
    x = traj.x
    x2 = x**2 if x.ndim == 1 else np.sum(x**2, axis=0)
    return np.sqrt(traj.t**2 + x2)


class _History:
    """Growing grid with weighted values and integrand samples, shape ``(dim, n)``."""

    def __init__(self, problem: CauchyProblem, local: SolveReport):
        p = problem.params
        self.problem = problem
        self.p = p
        self.dim = problem.dim
        self.system = problem.is_system
        self.lam = problem.lam_vec
        self.mu = self.lam / p.rho
        self.y0 = problem.x0_vec / math.gamma(p.gamma)
        self.s = list(local.traj.s)
        y = np.atleast_2d(local.traj.y)
        self.y = [y[:, i].copy() for i in range(y.shape[1])]
        t = local.traj.t
        # integrand on the local nodes, node 0 by the solver's probe
        from .volterra import _Integrand

        M = _Integrand(problem, t, local.traj.s)(np.asarray(local.traj.y))
        M = np.atleast_2d(M)
        self.M = [M[:, i].copy() for i in range(M.shape[1])]

    def rhs(self, t, x):
        """phi at one point; ``x`` has shape (dim,)."""
        if self.system:
            return _call_rhs(self.problem.rhs, np.array([t]), x[:, None], True)[:, 0]
        return _call_rhs(self.problem.rhs, np.array([t]), x, False)

    def integrand(self, t, s, y):
        x = s ** (self.p.gamma - 1.0) * y
        return t**self.lam * self.rhs(t, x)

    def history_x(self, s_targets):
        """Raw tail forcing ``x1`` at targets beyond the last node."""
        p = self.p
        nodes = np.asarray(self.s)
        M = np.asarray(self.M)
        out = np.empty((len(s_targets), self.dim))
        for q, sq in enumerate(np.maximum(s_targets, nodes[-1])):
            for i in range(self.dim):
                w = row_weights(nodes, p.alpha, self.mu[i], target=sq)
                I = p.rho ** (-self.mu[i]) * float(w @ M[:, i]) / math.gamma(p.alpha)
                out[q, i] = self.y0[i] * sq ** (p.gamma - 1.0) + I
        return out

    def step(self, s_new, t_new, tol, max_iter):
        """Solve on new nodes ``s_new``; returns (y, M, iterations, residual, ok)."""
        p = self.p
        old = np.asarray(self.s)
        Mold = np.asarray(self.M)
        n_old = old.size
        nodes = np.concatenate([old, s_new])
        K = s_new.size
        ys = np.empty((K, self.dim))
        Ms = np.empty((K, self.dim))
        y_prev = np.asarray(self.y[-1], dtype=float)
        it_max, res_max = 0, 0.0
        for j in range(K):
            n = n_old + j
            sn, tn = s_new[j], t_new[j]
            scale = sn ** (1.0 - p.gamma) / math.gamma(p.alpha)
            known = np.empty(self.dim)
            diag = np.empty(self.dim)
            for i in range(self.dim):
                w = row_weights(nodes[: n + 1], p.alpha, self.mu[i])
                c = scale * p.rho ** (-self.mu[i])
                known[i] = self.y0[i] + c * (w[:n_old] @ Mold[:, i] + w[n_old:n] @ Ms[:j, i])
                diag[i] = c * w[n]
            y = y_prev.copy()
            ok = False
            for it in range(1, max_iter + 1):
                m = self.integrand(tn, sn, y)
                y_new = known + diag * m
                if not np.all(np.isfinite(y_new)):
                    return None, None, it, math.inf, False
                r = float(np.max(np.abs(y_new - y)))
                y = y_new
                if r <= tol * max(1.0, float(np.max(np.abs(y)))):
                    ok = True
                    break
            if not ok:
                return None, None, it, r, False
            m = self.integrand(tn, sn, y)
            # defect of the stored value against its own image
            res_max = max(res_max, float(np.max(np.abs(known + diag * m - y))))
            it_max = max(it_max, it)
            ys[j], Ms[j] = y, m
            y_prev = y
        return ys, Ms, it_max, res_max, True

    def append(self, s_new, ys, Ms):
        self.s.extend(s_new)
        self.y.extend(ys)
        self.M.extend(Ms)

    def trajectory(self):
        y = np.asarray(self.y).T
        if not self.system:
            y = y[0]
        return WeightedTrajectory(self.p, SGrid(np.asarray(self.s), self.p.rho), y)


def _theta(hist: _History, ts, x1, k):
    """Sampled ``max |phi|`` over the tube ``|x - x1(t)| <= k`` above ``ts``."""
    off = np.linspace(-k, k, LATTICE)
    T = np.repeat(ts, LATTICE)
    if hist.system:
        signs = np.where(np.arange(hist.dim) % 2 == 0, 1.0, -1.0)[:, None]
        base = np.repeat(x1.T, LATTICE, axis=1)  # (dim, 17*17)
        O = np.tile(off, ts.size)[None, :]
        vals = [_call_rhs(hist.problem.rhs, T, base + O, True),
                _call_rhs(hist.problem.rhs, T, base + signs * O, True)]
        return float(max(np.max(np.abs(v)) for v in vals))
    X = np.repeat(x1[:, 0], LATTICE) + np.tile(off, ts.size)
    return float(np.max(np.abs(_call_rhs(hist.problem.rhs, T, X, False))))


def continue_solution(problem: CauchyProblem, local: SolveReport,
                      opts: ContinuationOptions | None = None) -> ContinuationReport:
    """Extend ``local`` towards ``opts.target_T``.

    Stops with ``reached_target``, ``suspected_blowup`` (``|Phi|`` above the
    threshold after ``trailing`` strictly increasing step values) or
    ``stalled`` (step cap, a step below floating-point resolution, or a step
    whose iteration fails even on a refined grid).
    """
    opts = opts or ContinuationOptions()
    if not local.converged:
        raise ParameterDomainError("continuation needs a converged local solution")
    p = problem.params
    a, rho = p.alpha, p.rho
    hist = _History(problem, local)
    steps: List[StepRecord] = []

    def phi_at_end():
        y = np.asarray(hist.y[-1])
        s = hist.s[-1]
        x = s ** (p.gamma - 1.0) * y
        return float(math.sqrt(p.to_t(s) ** 2 + float(np.sum(x**2))))

    phi = [phi_at_end()]
    phi_t = [float(p.to_t(hist.s[-1]))]
    target = opts.target_T
    classification, message = None, ""
    while classification is None:
        s_cur = hist.s[-1]
        t_cur = float(p.to_t(s_cur))
        if t_cur >= target * (1.0 - 1e-14):
            classification = "reached_target"
            break
        if len(steps) >= opts.max_steps:
            classification, message = "stalled", "step cap reached"
            break
        t_hi = min(t_cur + 1.0, target)
        s_hi = float(p.to_s(t_hi))
        try:
            ts = np.linspace(t_cur, t_hi, LATTICE)
            x1 = hist.history_x(p.to_s(ts))
            X = float(np.max(np.abs(x1)))
            k = opts.k_step if opts.k_step is not None else max(1.0, X)
            theta = _theta(hist, ts, x1, k)
        except RhsEvaluationError as exc:
            X, k, theta = math.inf, math.inf, math.inf
            message = f"step bound unavailable: {exc}"
        if not math.isfinite(theta) or not math.isfinite(X):
            classification = "stalled"
            message = message or "tail forcing or step bound is not finite"
            break
        if theta == 0.0:
            ds, h_formula = math.inf, 1.0
        else:
            ds = (k * math.gamma(a + 1.0) / theta) ** (1.0 / a)
            h_formula = min((k * rho**a * math.gamma(a + 1.0) / theta) ** (1.0 / (rho * a)), 1.0)
        s_end = min(s_cur + ds, s_hi)
        nodes = opts.nodes_per_step
        result = None
        for attempt in range(2):
            if (s_end - s_cur) < 4.0 * nodes * np.spacing(s_end):
                message = "step length below floating-point resolution"
                break
            s_new = s_cur + (s_end - s_cur) * np.arange(1, nodes + 1) / nodes
            s_new[-1] = s_end
            t_new = p.to_t(s_new)
            try:
                result = hist.step(s_new, t_new, opts.tol, opts.max_iter)
            except RhsEvaluationError as exc:
                result, message = None, f"rhs failed inside step: {exc}"
            if result is not None and result[4]:
                break
            result = None
            nodes *= 2
        if result is None:
            classification = "stalled"
            message = message or "step iteration did not converge after refinement"
            break
        ys, Ms, iters, res, _ = result
        hist.append(s_new, ys, Ms)
        steps.append(StepRecord(t_cur, float(t_new[-1]), float(t_new[-1]) - t_cur, h_formula,
                                theta, k, iters, res, True, s_new.size))
        phi.append(phi_at_end())
        phi_t.append(float(t_new[-1]))
        tail = np.asarray(phi[-opts.trailing:])
        if (phi[-1] >= opts.blowup_threshold and tail.size >= opts.trailing
                and np.all(np.diff(tail) > 0)):
            classification = "suspected_blowup"
    return ContinuationReport(hist.trajectory(), steps, classification, np.asarray(phi),
                              np.asarray(phi_t), message=message)


def stitched_residual(problem: CauchyProblem, traj: WeightedTrajectory) -> float:
    """Largest weighted defect of ``traj`` in the discrete Volterra equation, row by row."""
    from .volterra import _Integrand

    p = problem.params
    y = np.atleast_2d(np.asarray(traj.y))
    M = np.atleast_2d(_Integrand(problem, traj.t, traj.s)(np.asarray(traj.y)))
    y0 = problem.x0_vec / math.gamma(p.gamma)
    mu = problem.lam_vec / p.rho
    s = traj.s
    worst = 0.0
    for n in range(1, s.size):
        c = s[n] ** (1.0 - p.gamma) / math.gamma(p.alpha)
        for i in range(y.shape[0]):
            w = row_weights(s[: n + 1], p.alpha, mu[i])
            img = y0[i] + c * p.rho ** (-mu[i]) * float(w @ M[i, : n + 1])
            worst = max(worst, abs(img - y[i, n]))
    return worst


def gronwall_bound(theta, omega: float, alpha: float, grid: SGrid) -> np.ndarray:
    """Discrete majorant ``B`` of any ``v >= 0`` with ``v_n <= theta_n + omega * sum_j w[n][j] v_j``.

    ``w`` are the product-integration weights of ``(s-w)**(alpha-1)``. The
    diagonal weight is kept, so the recursion is solved implicitly:
    ``B_n = (theta_n + omega * sum_{j<n} w[n][j] B_j) / (1 - omega * w[n][n])``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(grid),):
        raise ParameterDomainError(f"theta has shape {theta.shape}, grid has {len(grid)} nodes")
    if np.any(theta < 0) or not np.all(np.isfinite(theta)):
        raise ParameterDomainError("theta must be finite and nonnegative")
    if not omega >= 0:
        raise ParameterDomainError(f"omega={omega!r} must be nonnegative")
    W = build_weights(alpha, grid).w
    B = np.empty_like(theta)
    B[0] = theta[0]
    for n in range(1, theta.size):
        den = 1.0 - omega * W[n, n]
        if den <= 0:
            raise RegimeError("grid too coarse: omega * w[n][n] >= 1")
        B[n] = (theta[n] + omega * (W[n, :n] @ B[:n])) / den
    return B


@dataclass
class CertificateReport:
    holds: bool  # growth hypothesis at every node
    first_violation: Optional[int]
    first_violation_t: Optional[float]
    linear_growth: bool  # f(u) <= u on the sampled range
    dominates: bool  # bound_trace >= |y| at every node
    bound_trace: np.ndarray
    theta: np.ndarray
    omega: float
    margin: np.ndarray = field(repr=False, default=None)


def _eval_env(fn: Callable, *args):
    try:
        with np.errstate(all="ignore"):
            v = np.broadcast_to(np.asarray(fn(*args), dtype=float), np.shape(args[0])).copy()
    except Exception as exc:
        raise CertificateInputError(f"envelope evaluation failed: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise CertificateInputError("envelope returned a non-finite value")
    return v


def check_global_certificate(problem: CauchyProblem, g: Callable, f: Callable, psi: Callable,
                             traj: WeightedTrajectory) -> CertificateReport:
    """Check ``|phi(t, x)| <= g(t) f(|x|) + psi(t)`` along ``traj`` and build the bound trace.

    The trace is the discrete Gronwall majorant with
    ``theta_n = |x0|/Gamma(gamma) + S**(1-gamma)/Gamma(alpha) * (W psi)_n`` and
    ``omega = S**(1-gamma) * max g / Gamma(alpha)``, ``S`` the last node.
    The majorant bounds ``|y|`` when the hypothesis holds and ``f(u) <= u``;
    for ``gamma < 1`` the weight ``S**(1-gamma)`` makes the chain a heuristic,
    which is why ``holds`` and ``dominates`` are reported separately.
    """
    p = problem.params
    if problem.is_system:
        raise CertificateInputError("certificates are implemented for scalar problems")
    if traj.params != p:
        raise CertificateInputError("trajectory and problem disagree on the orders")
    s, t = traj.s, traj.t.copy()
    y = np.asarray(traj.y)
    x = traj.x
    first = 1 if p.gamma < 1.0 else 0
    tt, xx = t[first:], x[first:]
    phi = np.abs(_call_rhs(problem.rhs, tt, xx, False))
    env = _eval_env(g, tt) * _eval_env(f, np.abs(xx)) + _eval_env(psi, tt)
    slack = 1e-12 * np.maximum(1.0, np.abs(env))
    margin = env - phi
    bad = np.flatnonzero(margin < -slack)
    holds = bad.size == 0
    fv = int(bad[0] + first) if not holds else None

    u = np.concatenate([np.abs(xx), np.abs(y)])
    linear_growth = bool(np.all(_eval_env(f, u) <= u * (1 + 1e-12) + 1e-300))

    tq = t.copy()
    tq[0] = PROBE * t[1]
    S = s[-1]
    W = build_weights(p.alpha, traj.grid).w
    c = S ** (1.0 - p.gamma) / math.gamma(p.alpha)
    theta = abs(float(problem.x0_vec[0])) / math.gamma(p.gamma) + c * (W @ _eval_env(psi, tq))
    omega = c * float(np.max(np.abs(_eval_env(g, tq))))
    B = gronwall_bound(theta, omega, p.alpha, traj.grid)
    # phi = x with g = 1 makes B and |y| solve the same recursion: allow ties
    dominates = bool(np.all(B >= np.abs(y) - 1e-12 * np.maximum(1.0, np.abs(y))))
    return CertificateReport(holds, fv, float(t[fv]) if fv is not None else None, linear_growth,
                             dominates, B, theta, omega, margin)


def envelope_bound(problem: CauchyProblem, traj: WeightedTrajectory, envelope: Callable) -> np.ndarray:
    """Weighted majorant from a pointwise envelope ``G(t) >= |phi(t, x(t))|``.

    Returns ``|x0|/Gamma(gamma) + s**(1-gamma)/Gamma(alpha) * rho**(-mu) * sum_j W_nj t_j**lam G(t_j)``,
    the homogeneous term plus the history integral with ``|phi|`` replaced by
    ``G``, discretised with the solver's weights. Since the weights are
    nonnegative it dominates ``|y|`` node-wise whenever the envelope holds
    at the nodes.
    """
    p = problem.params
    lam = float(problem.lam_vec[0])
    mu = lam / p.rho
    s, t = traj.s, traj.t.copy()
    t[0] = PROBE * t[1] if (lam > 0 or p.gamma < 1.0) else t[0]
    MG = t**lam * _eval_env(envelope, t)
    out = np.empty_like(s)
    out[0] = abs(float(problem.x0_vec[0])) / math.gamma(p.gamma)
    for n in range(1, s.size):
        w = row_weights(s[: n + 1], p.alpha, mu)
        out[n] = out[0] + s[n] ** (1.0 - p.gamma) / math.gamma(p.alpha) * p.rho ** (-mu) * float(w @ MG[: n + 1])
    return out
