"""Gauss-Legendre-Lobatto rules, differentiation matrices and Kronecker helpers.

Grid linearisation convention (used everywhere in the package): a tensor
node ``(i, j)`` with ``i`` the x-index and ``j`` the y-index, both in
``0..N``, lives at linear index ``i * (N + 1) + j``.  With this convention
``numpy.kron(Ax, By)`` acts as ``Ax`` along x and ``By`` along y.
"""

from dataclasses import dataclass

import numpy as np

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


@dataclass(frozen=True)
class SpectralRule1D:
    """GLL nodes, weights and differentiation matrix on [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    diff: np.ndarray


@dataclass(frozen=True)
class ScaledOperators1D:
    """One-dimensional operators mapped to an interval of length ``h``."""

    h: float
    mass: np.ndarray
    stiff: np.ndarray
    diff_scaled: np.ndarray


def _legendre(N, x):
    """Return P_N(x) and P_{N-1}(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, N + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def barycentric_diff(nodes):
    """Lagrange differentiation matrix on ``nodes`` via barycentric weights."""
    x = np.asarray(nodes, dtype=float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    w = 1.0 / np.prod(dx, axis=1)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    # negative-sum trick keeps row sums at roundoff level
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def gll_rule(N):
    """Gauss-Legendre-Lobatto rule of polynomial degree ``N``.

    Nodes are the roots of ``(1 - x**2) P_N'(x)``, found by Newton's method
    started from the Chebyshev-Gauss-Lobatto points.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"GLL order must be an integer >= 1, got {N!r}")
    N = int(N)
    x = -np.cos(np.pi * np.arange(N + 1) / N)
    if N > 1:
        for _ in range(NEWTON_MAXITER):
            p, p_prev = _legendre(N, x)
            # Newton step for (1-x^2) P_N' written with P_N, P_{N-1}
            step = (x * p - p_prev) / ((N + 1) * p)
            x = x - step
            if np.max(np.abs(step)) <= NEWTON_TOL:
                break
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if N % 2 == 0:
        x[N // 2] = 0.0
    p, _ = _legendre(N, x)
    weights = 2.0 / (N * (N + 1) * p**2)
    return SpectralRule1D(order=N, nodes=x, weights=weights, diff=barycentric_diff(x))


def scale_to_element(rule, h):
    if not h > 0:
        raise ValueError(f"element length must be positive, got {h}")
    mass = 0.5 * h * rule.weights
    diff_scaled = (2.0 / h) * rule.diff
    stiff = diff_scaled.T @ (mass[:, None] * diff_scaled)
    return ScaledOperators1D(h=float(h), mass=mass, stiff=stiff, diff_scaled=diff_scaled)


def kron_apply(A, B, v):
    """Apply ``kron(A, B)`` to ``v`` without forming the Kronecker product."""
    A = np.asarray(A)
    B = np.asarray(B)
    v = np.asarray(v)
    p, q = A.shape[1], B.shape[1]
    if A.ndim != 2 or B.ndim != 2 or v.shape != (p * q,):
        raise ValueError(
            f"kron_apply: shapes {A.shape}, {B.shape} incompatible with vector {v.shape}"
        )
    V = v.reshape(p, q)
    return (A @ V @ B.T).reshape(-1)
