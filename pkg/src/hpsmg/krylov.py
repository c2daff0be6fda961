"""Restarted GMRES and flexible GMRES for complex systems."""

from dataclasses import dataclass, field
import logging

import numpy as np

log = logging.getLogger(__name__)


class KrylovBreakdown(ArithmeticError):
    """Arnoldi produced a non-finite basis vector."""


@dataclass
class KrylovConfig:
    restart: int = 60
    tol: float = 1e-8
    max_iters: int = 10000
    record_history: bool = True
    reorthogonalize: bool = False

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError(f"restart must be >= 1, got {self.restart}")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    final_residual: float = float("nan")
    wall_build: float = 0.0
    wall_solve: float = 0.0
    precond_memory: int = 0


def as_operator(op):
    """Turn a matrix, an object with ``matvec`` or a callable into a callable."""
    if callable(op) and not hasattr(op, "matvec"):
        return op
    if hasattr(op, "matvec"):
        return op.matvec
    return lambda v: op @ v


def _givens(a, b):
    """Complex Givens rotation zeroing ``b`` in ``(a, b)``."""
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, np.conj(b) / abs(b), abs(b)
    r = np.hypot(abs(a), abs(b))
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return c, s, (a / abs(a)) * r


def _cycle(A, r0, beta, m, precond, tol_abs, reorth, history, bnorm, flexible, bases=None):
    """One Arnoldi cycle of at most ``m`` steps.

    Returns the correction, the number of steps and the estimated residual.
    The orthonormal basis is appended to ``bases`` when a list is given.
    """
    n = r0.size
    V = np.empty((m + 1, n), dtype=complex)
    Z = np.empty((m, n), dtype=complex) if flexible else None
    Hh = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    gvec = np.zeros(m + 1, dtype=complex)
    gvec[0] = beta
    V[0] = r0 / beta
    k = 0
    res = beta
    for j in range(m):
        z = precond(V[j]) if precond is not None else V[j]
        if flexible:
            Z[j] = z
        w = np.asarray(A(z), dtype=complex)
        for _ in range(2 if reorth else 1):
            for i in range(j + 1):
                hij = np.vdot(V[i], w)
                Hh[i, j] += hij
                w -= hij * V[i]
        hnext = np.linalg.norm(w)
        if not np.isfinite(hnext):
            raise KrylovBreakdown(f"non-finite Arnoldi vector at step {j + 1}")
        Hh[j + 1, j] = hnext
        for i in range(j):
            t = cs[i] * Hh[i, j] + sn[i] * Hh[i + 1, j]
            Hh[i + 1, j] = -np.conj(sn[i]) * Hh[i, j] + cs[i] * Hh[i + 1, j]
            Hh[i, j] = t
        cs[j], sn[j], Hh[j, j] = _givens(Hh[j, j], hnext)
        Hh[j + 1, j] = 0.0
        gvec[j + 1] = -np.conj(sn[j]) * gvec[j]
        gvec[j] = cs[j] * gvec[j]
        res = abs(gvec[j + 1])
        k = j + 1
        if history is not None:
            history.append(res / bnorm)
        # happy breakdown: the Krylov space is invariant
        if res <= tol_abs or hnext <= 1e-14 * beta:
            break
        V[j + 1] = w / hnext
    if bases is not None:
        bases.append(V[:k].copy())
    y = np.linalg.solve(np.triu(Hh[:k, :k]), gvec[:k]) if k else np.zeros(0)
    basis = Z[:k] if flexible else V[:k]
    dx = basis.T @ y
    if precond is not None and not flexible:
        dx = precond(dx)
    return dx, k, res


def _solve(op, rhs, precond, config, x0, flexible, bases=None):
    A = as_operator(op)
    M = as_operator(precond) if precond is not None else None
    cfg = config or KrylovConfig()
    b = np.asarray(rhs, dtype=complex)
    bnorm = np.linalg.norm(b)
    report = SolveReport()
    if bnorm == 0:
        report.converged = True
        report.final_residual = 0.0
        return np.zeros_like(b), report
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=complex)
    history = [] if cfg.record_history else None
    r = b - A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    if history is not None:
        history.append(beta / bnorm)
    while True:
        if beta <= cfg.tol * bnorm:
            report.converged = True
            break
        if report.iterations >= cfg.max_iters:
            break
        m = min(cfg.restart, cfg.max_iters - report.iterations)
        dx, k, _ = _cycle(A, r, beta, m, M, cfg.tol * bnorm, cfg.reorthogonalize,
                          history, bnorm, flexible, bases)
        x += dx
        report.iterations += k
        # convergence is judged on the true residual
        r = b - A(x)
        beta = np.linalg.norm(r)
    report.final_residual = beta / bnorm
    if history is not None:
        report.residual_history = history
    if not report.converged:
        log.warning("Krylov solve stopped after %d iterations at residual %.3e",
                    report.iterations, report.final_residual)
    return x, report


def gmres(op, rhs, config=None, x0=None, precond=None, bases=None):
    """Restarted GMRES, optionally right-preconditioned by a fixed operator.

    Returns ``(x, SolveReport)``; the reported residual is the true
    relative residual ``|rhs - op x| / |rhs|``.  Pass a list as ``bases``
    to collect the Arnoldi basis of every restart cycle.
    """
    return _solve(op, rhs, precond, config, x0, False, bases)


def fgmres(op, rhs, precond, config=None, x0=None, bases=None):
    """Flexible GMRES; ``precond`` may change from one application to the next."""
    return _solve(op, rhs, precond, config, x0, True, bases)


def gmres_fixed(op, rhs, iters):
    """``iters`` unpreconditioned GMRES steps from a zero guess, no convergence test."""
    A = as_operator(op)
    b = np.asarray(rhs, dtype=complex)
    beta = np.linalg.norm(b)
    if beta == 0:
        return np.zeros_like(b)
    dx, _, _ = _cycle(A, b, beta, iters, None, 0.0, False, None, beta, False)
    return dx
