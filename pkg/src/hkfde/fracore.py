"""Orders, grids, weighted trajectories and Cauchy problems.

Everything downstream works in the transformed variable ``s = t**rho / rho``.
Under that substitution the Katugampola integral of order ``a`` becomes the
Riemann-Liouville integral ``(1/Gamma(a)) * int_0^s (s-w)**(a-1) f(w) dw`` and
``t**(1-rho) d/dt`` becomes ``d/ds``, so a single code path serves every
``rho > 0``.

Solutions are stored only through their weighted representative
``y = s**(1-gamma) * x``, which stays finite at ``s = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptyDomainError,
    IncompatibleInputError,
    ParameterDomainError,
)

__all__ = [
    "FhkParams",
    "SGrid",
    "WeightedTrajectory",
    "CauchyProblem",
    "derive_gamma",
    "weighted_norm",
    "weighted_distance",
]


def derive_gamma(alpha: float, beta: float) -> float:
    """Type index ``gamma = alpha + beta*(1 - alpha)``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"order alpha={alpha!r} violates 0<alpha<1")
    if not 0.0 <= beta <= 1.0:
        raise ParameterDomainError(f"type beta={beta!r} violates 0<=beta<=1")
    return alpha + beta * (1.0 - alpha)


@dataclass(frozen=True)
class FhkParams:
    """Order ``alpha``, type ``beta`` and scale ``rho`` of the derivative."""

    alpha: float
    beta: float
    rho: float = 1.0
    gamma: float = field(init=False)

    def __post_init__(self):
        g = derive_gamma(float(self.alpha), float(self.beta))
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ParameterDomainError(f"scale rho={self.rho!r} violates rho>0")
        object.__setattr__(self, "gamma", g)

    def to_s(self, t):
        return np.asarray(t, dtype=float) ** self.rho / self.rho

    def to_t(self, s):
        return (self.rho * np.asarray(s, dtype=float)) ** (1.0 / self.rho)


@dataclass(frozen=True, eq=False)
class SGrid:
    """Strictly increasing nodes ``0 = s_0 < s_1 < ... < s_N`` in ``s``."""

    nodes: np.ndarray
    rho: float = 1.0

    def __post_init__(self):
        s = np.array(self.nodes, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise EmptyDomainError("grid needs at least one node")
        if s[0] != 0.0:
            raise ParameterDomainError(f"grid must start at s=0, got {s[0]!r}")
        if not np.all(np.isfinite(s)) or np.any(np.diff(s) <= 0):
            raise ParameterDomainError("grid nodes must be finite and strictly increasing")
        if not self.rho > 0:
            raise ParameterDomainError(f"scale rho={self.rho!r} violates rho>0")
        s.setflags(write=False)
        object.__setattr__(self, "nodes", s)

    @classmethod
    def uniform(cls, T: float, N: int, rho: float = 1.0) -> "SGrid":
        """``N`` equal steps in ``s`` covering ``t`` in ``[0, T]``."""
        return cls.graded(T, N, rho, grade=1.0)

    @classmethod
    def graded(cls, T: float, N: int, rho: float = 1.0, grade: float = 2.0) -> "SGrid":
        """Nodes ``S * (j/N)**grade``; ``grade > 1`` clusters nodes near 0."""
        if N < 1:
            raise EmptyDomainError("N must be >= 1")
        if not T > 0:
            raise ParameterDomainError(f"horizon T={T!r} must be positive")
        if not grade >= 1.0:
            raise ParameterDomainError("grade must be >= 1")
        S = T**rho / rho
        s = S * (np.arange(N + 1) / N) ** grade
        s[-1] = S
        return cls(s, rho)

    @classmethod
    def from_t(cls, t: Sequence[float], rho: float = 1.0) -> "SGrid":
        t = np.asarray(t, dtype=float)
        return cls(t**rho / rho, rho)

    @property
    def t(self) -> np.ndarray:
        return (self.rho * self.nodes) ** (1.0 / self.rho)

    @property
    def N(self) -> int:
        return self.nodes.size - 1

    def __len__(self):
        return self.nodes.size

    def same_as(self, other: "SGrid") -> bool:
        return (
            self.rho == other.rho
            and self.nodes.shape == other.nodes.shape
            and bool(np.array_equal(self.nodes, other.nodes))
        )


@dataclass(frozen=True, eq=False)
class WeightedTrajectory:
    """Grid values of ``y = s**(1-gamma) * x``.

    ``y`` has shape ``(N+1,)`` for a scalar problem or ``(n, N+1)`` for a
    system of ``n`` components.
    """

    params: FhkParams
    grid: SGrid
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.shape[-1:] != (len(self.grid),) or y.ndim > 2:
            raise IncompatibleInputError(
                f"y has shape {y.shape}, grid has {len(self.grid)} nodes"
            )
        if self.grid.rho != self.params.rho:
            raise IncompatibleInputError("grid and params disagree on rho")
        if not np.all(np.isfinite(y[..., 0])):
            raise ParameterDomainError("weighted value at s=0 must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[0]

    @property
    def s(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def x(self) -> np.ndarray:
        """Raw values ``s**(gamma-1) * y``; NaN at ``s=0`` when ``gamma < 1``."""
        g = self.params.gamma
        s = self.grid.nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            x = s ** (g - 1.0) * self.y
        if g < 1.0:
            x[..., 0] = np.nan
        else:
            x[..., 0] = self.y[..., 0]
        return x

    def with_y(self, y) -> "WeightedTrajectory":
        return WeightedTrajectory(self.params, self.grid, y)


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    """One initial value problem for the Hilfer-Katugampola derivative.

    ``rhs(t, x)`` must accept numpy arrays. For a system, ``x`` arrives with
    shape ``(n, ...)`` and the result must have the same leading dimension.
    ``lam`` is the exponent for which ``t**lam * rhs(t, x(t))`` stays bounded
    near ``t = 0``; it may be a sequence (one per component).
    """

    params: FhkParams
    x0: float | Sequence[float]
    rhs: Callable
    lam: float | Sequence[float] = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.ndim != 1 or not np.all(np.isfinite(x0)):
            raise ParameterDomainError("x0 must be a finite scalar or vector")
        lam = np.broadcast_to(np.asarray(self.lam, dtype=float), x0.shape)
        rho = self.params.rho
        if np.any(lam < 0) or np.any(lam >= rho):
            # the kernel tau**(rho-lam-1) is integrable at 0 only for lam < rho
            raise ParameterDomainError(
                f"singularity exponent lam={self.lam!r} violates 0<=lam<rho={rho}"
            )
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ParameterDomainError(f"horizon T={self.horizon!r} must be positive")

    @property
    def dim(self) -> int:
        return np.atleast_1d(self.x0).size

    @property
    def is_system(self) -> bool:
        return np.ndim(self.x0) > 0

    @property
    def x0_vec(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.x0, dtype=float))

    @property
    def lam_vec(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.lam, dtype=float), (self.dim,)).copy()


def weighted_norm(traj: WeightedTrajectory) -> float:
    """Sup of ``|y|`` over the grid (and over components)."""
    y = np.asarray(traj.y if isinstance(traj, WeightedTrajectory) else traj)
    if y.size == 0:
        raise EmptyDomainError("weighted norm of an empty trajectory")
    return float(np.max(np.abs(y)))


def weighted_distance(a: WeightedTrajectory, b: WeightedTrajectory) -> float:
    if not a.grid.same_as(b.grid) or a.params != b.params:
        raise IncompatibleInputError("trajectories live on different grids or orders")
    if a.y.shape != b.y.shape:
        raise IncompatibleInputError("trajectories have different dimensions")
    return float(np.max(np.abs(a.y - b.y)))
