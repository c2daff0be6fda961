"""The merge hierarchy used as a recursive multigrid preconditioner.

At level ``l`` with ``M_l = [[A, B], [C, D]]`` one application is

    MG(v) = F v + P s,   s ~= S^{-1} R (v - M_l F v),

with ``F`` the block-diagonal solve on the leading faces, ``P = [-A^{-1}B; I]``,
``R`` the restriction to the trailing faces and ``S = M_{l+1}``.  The
coarse solve ``s`` recurses; at the deepest level used it is a fixed number
of unpreconditioned GMRES steps (or an exact nested-dissection solve).
Each coarse call is repeated ``gamma`` times as a Richardson iteration:
``gamma = 1`` is a V-cycle.
"""

from dataclasses import dataclass

import numpy as np

from .dissection import MergeHierarchy, build_hierarchy, direct_solve
from .krylov import gmres_fixed


@dataclass(frozen=True)
class MGConfig:
    """``depth`` counts levels: levels ``1..depth-1`` smooth, ``M_depth`` is coarse."""

    depth: int = 2
    gamma: int = 1
    coarse_iters: int = 4
    exact: bool = False

    def __post_init__(self):
        if self.depth < 2:
            raise ValueError(f"depth must be >= 2, got {self.depth}")
        if not self.exact:
            if self.gamma < 1:
                raise ValueError(f"gamma must be >= 1, got {self.gamma}")
            if self.coarse_iters < 1:
                raise ValueError(f"coarse_iters must be >= 1, got {self.coarse_iters}")


class MGPreconditioner:
    def __init__(self, hierarchy, config):
        L = hierarchy.num_levels
        if config.depth > L:
            raise ValueError(f"depth {config.depth} exceeds the {L} available levels")
        if config.exact and not hierarchy.complete:
            raise ValueError("exact coarse solve needs a fully factorized hierarchy")
        if len(hierarchy.levels) < config.depth - 1:
            raise ValueError(
                f"hierarchy has {len(hierarchy.levels)} eliminated levels, "
                f"depth {config.depth} needs {config.depth - 1}"
            )
        self.hierarchy = hierarchy
        self.config = config
        self.applications = 0

    @property
    def memory_bytes(self):
        c = self.config
        return self.hierarchy.memory_bytes(
            c.depth, exact=c.exact, keep_intermediate=(not c.exact and c.gamma > 1)
        )

    def coarse_solve(self, r, level):
        """Approximate ``M_level^{-1} r``.

        The inner solver (a further multigrid application, or fixed-step
        GMRES at the deepest level) is called ``gamma`` times inside a
        zero-started Richardson iteration on ``M_level``.
        """
        c = self.config
        if c.exact:
            if level == c.depth:
                return direct_solve(self.hierarchy, r, level)
            return self.apply(r, level)
        S = self.hierarchy.matrix(level)
        if level == c.depth:
            def inner(q):
                return gmres_fixed(S, q, c.coarse_iters)
        else:
            def inner(q):
                return self.apply(q, level)
        x = inner(r)
        for _ in range(c.gamma - 1):
            x = x + inner(r - S @ x)
        return x

    def apply(self, v, level=1):
        """One multigrid application on the level-``level`` system."""
        if not 1 <= level < self.config.depth:
            raise ValueError(f"level {level} outside 1..{self.config.depth - 1}")
        lf = self.hierarchy.levels[level - 1]
        v = np.asarray(v, dtype=complex)
        xA = lf.solve_A(v[: lf.nA])
        rD = v[lf.nA:] - lf.apply_C(xA, v.size - lf.nA)
        s = self.coarse_solve(rD, level + 1)
        return np.concatenate([xA - lf.solve_A_B(s), s])

    def __call__(self, v):
        self.applications += 1
        return self.apply(v, 1)


def build_preconditioner(system_or_hierarchy, config):
    """Build the hierarchy needed for ``config`` (if given a system) and wrap it."""
    if isinstance(system_or_hierarchy, MergeHierarchy):
        hier = system_or_hierarchy
    elif config.exact:
        hier = build_hierarchy(system_or_hierarchy)
    else:
        hier = build_hierarchy(system_or_hierarchy, upto=config.depth - 1, factor_coarse=False)
    return MGPreconditioner(hier, config)


def two_level_inverse(M, k):
    """Dense ``F + P S^{-1} R (I - M F)`` for the split of ``M`` after row/column ``k``."""
    M = np.asarray(M)
    n = M.shape[0]
    A, B, C, D = M[:k, :k], M[:k, k:], M[k:, :k], M[k:, k:]
    Ainv = np.linalg.inv(A)
    F = np.zeros_like(M, dtype=complex)
    F[:k, :k] = Ainv
    P = np.vstack([-Ainv @ B, np.eye(n - k)])
    S = D - C @ Ainv @ B
    R = np.hstack([np.zeros((n - k, k)), np.eye(n - k)])
    return F + P @ np.linalg.solve(S, R @ (np.eye(n) - M @ F))


def mg_apply(pre, v, level=1):
    return pre.apply(v, level)
