"""Batch front-end.

Usage::

    hkfde --config problem.cfg --output out.csv [--mode solve|continue|certify|operator] [--quiet]

The config is flat ``key = value`` text, one entry per line, ``#`` starts a
comment and lists are comma separated. The trajectory CSV goes to
``--output`` and a plain-text report next to it (``<output>.report.txt``).

Exit status: 0 success, 2 parameter-domain error, 3 non-convergence or
stall, 4 configuration or parse error. Every failure also prints one
``hkfde: error status=<n> type=<name> detail="..."`` line on stderr.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .continuation import ContinuationOptions, check_global_certificate, continue_solution
from .errors import ConfigError, HKFDEError
from .expr import ExprEvalError, ExprSyntaxError, compile_function, compile_rhs
from .fracore import CauchyProblem, FhkParams, SGrid, WeightedTrajectory, weighted_norm
from .operators import hilfer_katugampola_derivative, katugampola_derivative, katugampola_integral
from .volterra import SolveOptions, picard_solve, picard_solve_system

MODES = ("solve", "continue", "certify", "operator")
EXIT_OK, EXIT_DOMAIN, EXIT_STALL, EXIT_CONFIG = 0, 2, 3, 4

DEFAULT_PROVENANCE_H = (
    "h = min{(k rho^(alpha-gamma+1) Gamma(alpha+1-lambda/rho) / (L Gamma(1-lambda/rho)))"
    "^(1/(rho(alpha-gamma+1)-lambda)), T}"
)
DEFAULT_PROVENANCE_STEP = "h = min{(k rho^alpha Gamma(alpha+1) / Theta)^(1/(rho alpha)), 1}"

_FLOAT_KEYS = {"alpha", "beta", "rho", "T", "tol", "k", "blowup_threshold", "target_T",
               "local_T", "grade", "order", "sing"}
_INT_KEYS = {"N", "max_iter", "max_steps", "nodes_per_step"}
_KNOWN = _FLOAT_KEYS | _INT_KEYS | {"mode", "x0", "rhs", "lambda", "g", "f", "psi", "output",
                                    "interval", "operator", "input", "provenance_h",
                                    "provenance_step"}


@dataclass
class RunConfig:
    mode: str
    alpha: float
    beta: float
    rho: float = 1.0
    x0: list = field(default_factory=lambda: [1.0])
    T: float = 1.0
    N: int = 512
    rhs: list = field(default_factory=list)
    lam: list = field(default_factory=lambda: [0.0])
    tol: float = 1e-10
    max_iter: int = 200
    grade: float = 1.0
    interval: str = "horizon"  # "horizon", "local" or a number
    k: Optional[float] = None
    blowup_threshold: float = 1e8
    target_T: float = math.inf
    local_T: Optional[float] = None
    max_steps: int = 2000
    nodes_per_step: int = 8
    g: Optional[str] = None
    f: Optional[str] = None
    psi: Optional[str] = None
    operator: str = "integral"
    order: Optional[float] = None
    input: Optional[str] = None
    sing: float = 0.0
    output: Optional[str] = None
    provenance_h: str = DEFAULT_PROVENANCE_H
    provenance_step: str = DEFAULT_PROVENANCE_STEP


def parse_config(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return _build(raw)


def _num(key, value, kind=float):
    try:
        if kind is float and value.strip().lower() in ("inf", "unbounded"):
            return math.inf
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from None


def _list(key, value):
    return [_num(key, v) for v in value.split(",")]


def _build(raw: dict) -> RunConfig:
    for req in ("mode", "alpha", "beta"):
        if req not in raw:
            raise ConfigError(f"missing required key {req!r}")
    kw: dict = {}
    for key, value in raw.items():
        if key in _FLOAT_KEYS:
            kw[key] = _num(key, value)
        elif key in _INT_KEYS:
            kw[key] = _num(key, value, int)
        elif key == "x0":
            kw["x0"] = _list(key, value)
        elif key == "lambda":
            kw["lam"] = _list(key, value)
        elif key == "rhs":
            kw["rhs"] = [part.strip() for part in value.split(",")]
        else:
            kw[key] = value
    cfg = RunConfig(**kw)
    if cfg.mode not in MODES:
        raise ConfigError(f"mode {cfg.mode!r} is not one of {', '.join(MODES)}")
    return cfg


def _check_mode_fields(cfg: RunConfig):
    if cfg.mode in ("solve", "continue", "certify") and not cfg.rhs:
        raise ConfigError(f"mode {cfg.mode} needs rhs")
    if cfg.mode == "certify" and None in (cfg.g, cfg.f, cfg.psi):
        raise ConfigError("mode certify needs g, f and psi")
    if cfg.mode == "continue" and not math.isfinite(cfg.target_T) and cfg.max_steps <= 0:
        raise ConfigError("unbounded continuation needs max_steps")
    if cfg.mode == "operator" and cfg.input is None:
        raise ConfigError("mode operator needs input")


def _problem(cfg: RunConfig) -> CauchyProblem:
    params = FhkParams(cfg.alpha, cfg.beta, cfg.rho)
    dim = len(cfg.x0)
    if len(cfg.rhs) != dim:
        raise ConfigError(f"{dim} initial values but {len(cfg.rhs)} rhs expressions")
    rhs = compile_rhs(cfg.rhs[0] if dim == 1 else cfg.rhs)
    lam = cfg.lam[0] if len(cfg.lam) == 1 else cfg.lam
    x0 = cfg.x0[0] if dim == 1 else cfg.x0
    return CauchyProblem(params, x0, rhs, lam, cfg.T)


def _fmt(v: float) -> str:
    return "" if not np.isfinite(v) else f"{v:.17g}"


def write_csv(path: Path, traj: WeightedTrajectory, extra: Optional[dict] = None):
    """Header ``t,s,x,y_weighted`` (``x1,y1,...`` for systems); 17 significant digits."""
    y = np.atleast_2d(traj.y)
    x = np.atleast_2d(traj.x)
    if traj.dim == 1:
        cols = ["t", "s", "x", "y_weighted"]
    else:
        cols = ["t", "s"] + [f"{c}{i + 1}" for i in range(traj.dim) for c in ("x", "y")]
    extra = extra or {}
    cols += list(extra)
    lines = [",".join(cols)]
    for n in range(len(traj.grid)):
        row = [_fmt(traj.t[n]), _fmt(traj.s[n])]
        for i in range(traj.dim):
            row += [_fmt(x[i, n]), _fmt(y[i, n])]
        row += [_fmt(v[n]) for v in extra.values()]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def read_csv_y(path: Path) -> np.ndarray:
    """Weighted columns of a trajectory CSV, shape ``(dim, N+1)``."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    idx = [i for i, c in enumerate(header) if c == "y_weighted" or (c.startswith("y") and c[1:].isdigit())]
    return np.array([[float(line.split(",")[i]) for line in lines[1:]] for i in idx])


def _params_lines(cfg: RunConfig):
    p = FhkParams(cfg.alpha, cfg.beta, cfg.rho)
    return [
        f"alpha = {_fmt(p.alpha)}",
        f"beta = {_fmt(p.beta)}",
        f"rho = {_fmt(p.rho)}",
        f"gamma = {_fmt(p.gamma)}",
        f"x0 = {', '.join(_fmt(v) for v in cfg.x0)}",
        f"lambda = {', '.join(_fmt(v) for v in cfg.lam)}",
        f"T = {_fmt(cfg.T)}",
        f"N = {cfg.N}",
    ]


def _solve_opts(cfg: RunConfig) -> SolveOptions:
    return SolveOptions(tol=cfg.tol, max_iter=cfg.max_iter, N=cfg.N, grade=cfg.grade, k=cfg.k)


def _solve_any(problem, opts, interval):
    solver = picard_solve_system if problem.is_system else picard_solve
    return solver(problem, opts, interval)


def _interval(cfg: RunConfig, problem: CauchyProblem, opts: SolveOptions) -> float:
    if cfg.interval == "horizon":
        return cfg.T
    if cfg.interval == "local":
        probe = _solve_any(problem, SolveOptions(tol=opts.tol, max_iter=1, N=opts.N, grade=opts.grade, k=opts.k), cfg.T)
        if probe.h_local is None:
            raise ConfigError("interval = local but the local radius is not computable")
        return probe.h_local
    return _num("interval", cfg.interval)


def _solve_report_lines(rep, cfg):
    h = "n/a" if rep.h_local is None else _fmt(rep.h_local)
    return [
        f"interval = [0, {_fmt(rep.interval)}]",
        f"iterations = {rep.iterations}",
        f"residual = {_fmt(rep.residual) or 'inf'}",
        f"converged = {str(rep.converged).lower()}",
        f"k = {_fmt(rep.k)}",
        f"L_estimate = {_fmt(rep.L) if rep.L is not None else 'n/a'}",
        f"h_local = {h}",
        f"h_local_formula = {cfg.provenance_h}",
        f"max_excursion = {_fmt(rep.max_excursion)}",
        f"weighted_norm = {_fmt(weighted_norm(rep.traj))}",
    ] + ([f"message = {rep.message}"] if rep.message else [])


def run(cfg: RunConfig, output: Path, quiet: bool = True) -> int:
    """Execute one configured run; returns the exit status."""
    _check_mode_fields(cfg)
    output = Path(output)
    report = [f"mode = {cfg.mode}"] + _params_lines(cfg)
    status = EXIT_OK

    if cfg.mode == "operator":
        params = FhkParams(cfg.alpha, cfg.beta, cfg.rho)
        grid = SGrid.graded(cfg.T, cfg.N, cfg.rho, cfg.grade)
        fn = compile_function(cfg.input, ("t",))
        F = np.asarray(fn(grid.t), dtype=float)
        order = cfg.order if cfg.order is not None else cfg.alpha
        if cfg.operator == "integral":
            out = katugampola_integral(order, cfg.rho, grid, F, cfg.sing)
        elif cfg.operator == "derivative":
            out = katugampola_derivative(order, cfg.rho, grid, F, cfg.sing)
        elif cfg.operator == "hilfer":
            out = hilfer_katugampola_derivative(params, grid, F, cfg.sing)
        else:
            raise ConfigError(f"operator {cfg.operator!r} is not one of integral, derivative, hilfer")
        lines = ["t,s,input,result"] + [
            ",".join((_fmt(a), _fmt(b), _fmt(c), _fmt(d))) for a, b, c, d in zip(grid.t, grid.nodes, F, out)
        ]
        output.write_text("\n".join(lines) + "\n")
        report += [f"operator = {cfg.operator}", f"order = {_fmt(order)}", f"input = {cfg.input}"]
    else:
        problem = _problem(cfg)
        opts = _solve_opts(cfg)
        if cfg.mode == "continue":
            local_T = cfg.local_T if cfg.local_T is not None else min(cfg.T, cfg.target_T)
            loc = _solve_any(problem, opts, min(local_T, cfg.T))
            report += ["[local]"] + _solve_report_lines(loc, cfg)
            if not loc.converged:
                write_csv(output, loc.traj)
                report += ["classification = stalled", "message = local solution did not converge"]
                status = EXIT_STALL
            else:
                copts = ContinuationOptions(k_step=cfg.k, max_steps=cfg.max_steps,
                                            blowup_threshold=cfg.blowup_threshold, target_T=cfg.target_T,
                                            nodes_per_step=cfg.nodes_per_step, tol=cfg.tol,
                                            max_iter=cfg.max_iter)
                rep = continue_solution(problem, loc, copts)
                write_csv(output, rep.traj)
                hs = [st.h_step for st in rep.steps]
                hf = [st.h_formula for st in rep.steps]
                report += [
                    "[continuation]",
                    f"classification = {rep.classification}",
                    f"target_T = {_fmt(cfg.target_T) or 'unbounded'}",
                    f"mu_estimate = {_fmt(rep.mu_est)}",
                    f"steps = {len(rep.steps)}",
                    f"h_step_min = {_fmt(min(hs)) if hs else 'n/a'}",
                    f"h_step_max = {_fmt(max(hs)) if hs else 'n/a'}",
                    f"h_formula_min = {_fmt(min(hf)) if hf else 'n/a'}",
                    f"h_step_formula = {cfg.provenance_step}",
                    f"phi_last = {_fmt(rep.phi_trace[-1])}",
                    f"weighted_norm = {_fmt(weighted_norm(rep.traj))}",
                ] + ([f"message = {rep.message}"] if rep.message else [])
                if rep.classification == "stalled":
                    status = EXIT_STALL
        else:
            interval = _interval(cfg, problem, opts)
            rep = _solve_any(problem, opts, interval)
            report += ["[solve]"] + _solve_report_lines(rep, cfg)
            if not rep.converged:
                status = EXIT_STALL
            if cfg.mode == "certify" and rep.converged:
                if problem.is_system:
                    raise ConfigError("mode certify supports scalar problems only")
                g = compile_function(cfg.g, ("t",))
                f = compile_function(cfg.f, ("x",))
                psi = compile_function(cfg.psi, ("t",))
                cert = check_global_certificate(problem, g, f, psi, rep.traj)
                write_csv(output, rep.traj, {"bound": cert.bound_trace})
                report += [
                    "[certificate]",
                    f"hypothesis_holds = {str(cert.holds).lower()}",
                    f"first_violation_t = {_fmt(cert.first_violation_t) if cert.first_violation_t is not None else 'none'}",
                    f"f_linear_growth = {str(cert.linear_growth).lower()}",
                    f"bound_dominates = {str(cert.dominates).lower()}",
                    f"omega = {_fmt(cert.omega)}",
                ]
            else:
                write_csv(output, rep.traj)
    report.append(f"status = {status}")
    report_path = output.with_name(output.name + ".report.txt")
    report_path.write_text("\n".join(report) + "\n")
    if not quiet:
        print("\n".join(report))
    return status


def _diagnostic(status: int, exc: BaseException):
    detail = str(exc).replace('"', "'").replace("\n", " ")
    print(f'hkfde: error status={status} type={type(exc).__name__} detail="{detail}"', file=sys.stderr)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hkfde", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="key = value problem file")
    ap.add_argument("--output", help="trajectory CSV path (overrides the config)")
    ap.add_argument("--mode", choices=MODES, help="overrides the configured mode")
    ap.add_argument("--quiet", action="store_true", help="do not echo the report")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = parse_config(text)
        if args.mode:
            cfg.mode = args.mode
        out = args.output or cfg.output
        if not out:
            raise ConfigError("no output path (use --output or the output key)")
        return run(cfg, Path(out), quiet=args.quiet)
    except (ConfigError, ExprSyntaxError) as exc:
        _diagnostic(EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except (HKFDEError, ExprEvalError) as exc:
        _diagnostic(EXIT_DOMAIN, exc)
        return EXIT_DOMAIN
    except OSError as exc:
        _diagnostic(EXIT_CONFIG, exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
