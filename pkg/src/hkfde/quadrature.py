"""Product-integration weights for the Abel kernel.

For nodes ``0 = s_0 < ... < s_N`` and a target ``s >= s_j`` the weight
``w[j]`` is the integral of ``(s - w)**(alpha-1) * w**(-sing)`` against the
hat function of node ``j``. Integrating the piecewise-linear interpolant of
``f`` against the kernel therefore reduces to ``sum_j w[j] * f_j``.

``sing != 0`` moves a known endpoint factor ``w**(-sing)`` of the
integrand into the kernel, so only the bounded factor has to be sampled.
Each interval is integrated with a Gauss-Jacobi rule when it touches a kernel
singularity, with Gauss-Legendre otherwise, and is split geometrically when a
singularity sits closer than one interval length. Hats are linear, so every
rule is exact up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import IncompatibleInputError, ParameterDomainError
from .fracore import SGrid

__all__ = ["KernelWeights", "build_weights", "row_weights", "apply_row"]

_GL_NEAR = roots_legendre(24)
_GL_FAR = roots_legendre(8)


@lru_cache(maxsize=64)
def _jacobi(a: float, b: float, n: int = 24):
    # weight (1-x)**a (1+x)**b on [-1, 1]; scipy divides by zero in an
    # unused branch when a + b = -1
    with np.errstate(divide="ignore", invalid="ignore"):
        return roots_jacobi(n, a, b)


def _check(alpha, sing):
    if not 0.0 < alpha <= 1.0:
        raise ParameterDomainError(f"kernel order alpha={alpha!r} violates 0<alpha<=1")
    # sing < 0 absorbs a non-smooth positive power w**|sing| into the kernel
    if not (np.isfinite(sing) and sing < 1.0):
        raise ParameterDomainError(f"endpoint exponent sing={sing!r} violates sing<1")


def _piece(p, q, a, b, s, alpha, sing, out):
    """Accumulate hat moments of ``[a, b]`` restricted to ``[p, q]`` into ``out``."""
    length = q - p
    right_sing = q == s and alpha < 1.0
    left_sing = p == 0.0 and sing != 0.0
    dist_r = s - q if alpha < 1.0 else np.inf
    dist_l = p if sing != 0.0 else np.inf

    if right_sing and left_sing:
        if s == b and p == a and a == 0.0:
            x, wq = _jacobi(alpha - 1.0, -sing)
            r = 0.5 * length
            w = p + r * (x + 1.0)
            k = wq * r ** (alpha - sing)
        else:
            m = 0.5 * (p + q)
            _piece(p, m, a, b, s, alpha, sing, out)
            _piece(m, q, a, b, s, alpha, sing, out)
            return
    elif right_sing:
        if dist_l < length:
            m = 0.5 * (p + q) if dist_l == 0 else p + min(dist_l, 0.5 * length)
            _piece(p, m, a, b, s, alpha, sing, out)
            _piece(m, q, a, b, s, alpha, sing, out)
            return
        x, wq = _jacobi(alpha - 1.0, 0.0)
        r = 0.5 * length
        w = p + r * (x + 1.0)
        k = wq * r**alpha * w ** (-sing)
    elif left_sing:
        if dist_r < length:
            m = q - max(dist_r, 0.5 * length) if dist_r < 0.5 * length else 0.5 * (p + q)
            _piece(p, m, a, b, s, alpha, sing, out)
            _piece(m, q, a, b, s, alpha, sing, out)
            return
        x, wq = _jacobi(0.0, -sing)
        r = 0.5 * length
        w = p + r * (x + 1.0)
        k = wq * r ** (1.0 - sing) * (s - w) ** (alpha - 1.0)
    else:
        if min(dist_l, dist_r) < length:
            if dist_r <= dist_l:
                m = q - dist_r
            else:
                m = p + dist_l
            _piece(p, m, a, b, s, alpha, sing, out)
            _piece(m, q, a, b, s, alpha, sing, out)
            return
        x, wq = _GL_NEAR
        r = 0.5 * length
        w = p + r * (x + 1.0)
        k = wq * r * (s - w) ** (alpha - 1.0) * w ** (-sing)
    hl = (b - w) / (b - a)
    out[0] += float(np.dot(k, hl))
    out[1] += float(np.dot(k, 1.0 - hl))


def row_weights(nodes, alpha: float, sing: float = 0.0, target: float | None = None) -> np.ndarray:
    """Weights of every node for ``int_0^target (target-w)**(alpha-1) w**(-sing) f(w) dw``.

    ``target`` defaults to the last node and must not lie before it.
    """
    _check(alpha, sing)
    s_nodes = np.asarray(nodes, dtype=float)
    n = s_nodes.size - 1
    W = np.zeros(n + 1)
    if n == 0:
        return W
    s = s_nodes[-1] if target is None else float(target)
    if s < s_nodes[-1]:
        raise IncompatibleInputError("target lies before the last node")
    a = s_nodes[:-1]
    b = s_nodes[1:]
    length = b - a
    with np.errstate(divide="ignore"):
        dist_r = (s - b) / length if alpha < 1.0 else np.full(n, np.inf)
        dist_l = a / length if sing != 0.0 else np.full(n, np.inf)
    ratio = np.minimum(dist_r, dist_l)

    A0 = np.zeros(n)
    A1 = np.zeros(n)
    for (x, wq), sel in ((_GL_FAR, ratio >= 4.0), (_GL_NEAR, (ratio >= 1.0) & (ratio < 4.0))):
        if not sel.any():
            continue
        aa, bb = a[sel][:, None], b[sel][:, None]
        r = 0.5 * (bb - aa)
        w = aa + r * (x + 1.0)
        k = wq * r
        if alpha < 1.0:
            k = k * (s - w) ** (alpha - 1.0)
        if sing != 0.0:
            k = k * w ** (-sing)
        hl = (bb - w) / (bb - aa)
        A0[sel] = np.sum(k * hl, axis=1)
        A1[sel] = np.sum(k * (1.0 - hl), axis=1)

    for j in np.flatnonzero(ratio < 1.0):
        out = [0.0, 0.0]
        _piece(a[j], b[j], a[j], b[j], s, alpha, sing, out)
        A0[j], A1[j] = out
    W[:-1] += A0
    W[1:] += A1
    return W


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """Lower-triangular product-integration weights on a grid.

    Row ``n`` approximates ``int_0^{s_n} (s_n-w)**(alpha-1) w**(-sing) f(w) dw``.
    """

    alpha: float
    grid: SGrid
    w: np.ndarray
    sing: float = 0.0

    def row(self, n: int) -> np.ndarray:
        return self.w[n, : n + 1]


@lru_cache(maxsize=32)
def _matrix(alpha: float, sing: float, key: bytes) -> np.ndarray:
    s = np.frombuffer(key, dtype=float)
    N = s.size - 1
    M = np.zeros((N + 1, N + 1))
    for n in range(1, N + 1):
        M[n, : n + 1] = row_weights(s[: n + 1], alpha, sing)
    M.setflags(write=False)
    return M


def build_weights(alpha: float, grid: SGrid, sing: float = 0.0) -> KernelWeights:
    """Full weight matrix for ``grid``; rows are cached per (alpha, sing, grid)."""
    _check(alpha, sing)
    M = _matrix(float(alpha), float(sing), grid.nodes.tobytes())
    return KernelWeights(float(alpha), grid, M, float(sing))


def apply_row(weights: KernelWeights, n: int, f) -> float:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.size < n + 1:
        raise IncompatibleInputError(f"need at least {n + 1} samples, got {f.shape}")
    return float(np.dot(weights.row(n), f[: n + 1]))
