"""Katugampola integral and derivative, and the Hilfer-Katugampola derivative.

All three act on samples over an :class:`SGrid`. A function with a known
endpoint singularity is passed as ``f = s**(-sing) * F``: the caller supplies
the bounded factor ``F`` and the exponent ``sing``, which the quadrature then
absorbs into its kernel. Derivative outputs carry NaN at ``s = 0``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import rgamma as _rgamma

from .errors import IncompatibleInputError, InsufficientGridError, ParameterDomainError
from .fracore import FhkParams, SGrid
from .quadrature import build_weights

__all__ = ["katugampola_integral", "katugampola_derivative", "hilfer_katugampola_derivative"]

_SING_EPS = 1e-12


def _samples(grid: SGrid, rho: float, f) -> np.ndarray:
    if grid.rho != rho:
        raise IncompatibleInputError(f"grid built for rho={grid.rho}, operator called with rho={rho}")
    f = np.asarray(f, dtype=float)
    if f.shape != (len(grid),):
        raise IncompatibleInputError(f"expected {len(grid)} samples, got shape {f.shape}")
    return f


def katugampola_integral(order: float, rho: float, grid: SGrid, f, sing: float = 0.0) -> np.ndarray:
    """Left-sided Katugampola integral of order ``order`` in ``(0, 1]`` at every node.

    In ``s`` this is ``(1/Gamma(order)) * int_0^s (s-w)**(order-1) f(w) dw``
    with ``f = w**(-sing) * F``; ``F`` are the samples passed in.
    """
    if not 0.0 < order <= 1.0:
        raise ParameterDomainError(f"integral order {order!r} violates 0<order<=1")
    F = _samples(grid, rho, f)
    W = build_weights(order, grid, sing).w
    out = (W @ F) / math.gamma(order)
    if order > sing + _SING_EPS:
        out[0] = 0.0
    elif abs(order - sing) <= _SING_EPS:
        # I^a of w**(-a) F tends to Gamma(1-a) F(0)
        out[0] = math.gamma(1.0 - sing) * F[0]
    else:
        out[0] = np.nan
    return out


def _ds(G: np.ndarray, s: np.ndarray) -> np.ndarray:
    d = np.full_like(G, np.nan)
    if np.isfinite(G[0]):
        d[1:] = np.gradient(G, s, edge_order=2)[1:]
    else:
        if s.size < 4:
            raise InsufficientGridError("need at least 4 nodes when the integral is singular at 0")
        d[1:] = np.gradient(G[1:], s[1:], edge_order=2)
    return d


def _split_derivative(order, rho, grid, F, sing):
    """``d/ds I^(1-order)(s**(-sing) F)`` as (coefficient of ``s**(-sing-order)``, remainder).

    The constant part ``F(0)`` is differentiated exactly by the power rule;
    finite differences only see ``F - F(0)``, whose integral is smoother at 0.
    """
    F0 = F[0]
    coef = F0 * math.gamma(1.0 - sing) * _rgamma(1.0 - sing - order)
    G = katugampola_integral(1.0 - order, rho, grid, F - F0, sing)
    return coef, _ds(G, grid.nodes)


def katugampola_derivative(order: float, rho: float, grid: SGrid, f, sing: float = 0.0) -> np.ndarray:
    """``t**(1-rho) d/dt`` applied to the integral of order ``1 - order``.

    The part of ``f`` carried by its value at 0 is differentiated in closed
    form; the rest by second-order finite differences in ``s``. Node 0 is NaN.
    """
    if not 0.0 < order < 1.0:
        raise ParameterDomainError(f"derivative order {order!r} violates 0<order<1")
    if len(grid) < 3:
        raise InsufficientGridError("finite differences need at least 3 nodes")
    F = _samples(grid, rho, f)
    coef, d = _split_derivative(order, rho, grid, F, sing)
    if coef != 0.0:
        d[1:] += coef * grid.nodes[1:] ** (-sing - order)
    return d


def hilfer_katugampola_derivative(params: FhkParams, grid: SGrid, f, sing: float = 0.0) -> np.ndarray:
    """Derivative of order ``alpha`` and type ``beta``.

    The outer integral of order ``gamma - alpha`` is applied to the derivative
    of ``G = I^(1-gamma) f`` through the identity

        I^m G' = (I^m G)' - G(0+) s**(m-1) / Gamma(m),   I^m G = I^(1-alpha) f,

    which avoids integrating finite differences that are undefined at 0.
    ``G(0+)`` is ``Gamma(gamma) * F(0)`` when ``sing == 1 - gamma`` and zero
    when ``sing < 1 - gamma``. In the first case the correction cancels the
    closed-form part of ``(I^m G)'`` exactly, so only the remainder is kept.
    """
    a, g = params.alpha, params.gamma
    if g - a == 0.0:
        return katugampola_derivative(a, params.rho, grid, f, sing)
    if sing > 1.0 - g + _SING_EPS:
        raise ParameterDomainError(
            f"input singularity s**(-{sing}) is stronger than the weight s**({g - 1}) admits"
        )
    if abs(sing - (1.0 - g)) > _SING_EPS:
        return katugampola_derivative(a, params.rho, grid, f, sing)
    if not 0.0 < a < 1.0:
        raise ParameterDomainError(f"derivative order {a!r} violates 0<order<1")
    if len(grid) < 3:
        raise InsufficientGridError("finite differences need at least 3 nodes")
    F = _samples(grid, params.rho, f)
    return _split_derivative(a, params.rho, grid, F, sing)[1]
