"""Level-by-level Schur elimination of the skeleton system.

Level ``l`` operates on ``M_l``, the matrix over the faces of levels ``>= l``;
the faces of level ``l`` are leading and split into independent merge
groups, so ``A_l`` is block diagonal and is factorized group by group.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla

from .skeleton import BlockMatrix, partition_level


class SingularMergeError(np.linalg.LinAlgError):
    """A merge block could not be factorized."""


def _lu(A, what):
    with warnings.catch_warnings():
        # singularity is reported below with context
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(A)
    d = np.abs(np.diag(lu[0]))
    if d.min() <= np.finfo(float).eps * d.max() * A.shape[0]:
        raise SingularMergeError(f"{what} is singular (pivot ratio {d.min() / d.max():.2e})")
    return lu


def merge_pair(T1, H1, T2, H2, alpha, beta):
    """Fuse two elements sharing side ``alpha`` of the first and ``beta`` of the second.

    ``T`` and ``H`` are transfer maps: they send incoming data of an
    element to the incoming data of its neighbours (the negated ItI map).
    The fused operators act on the six exterior sides, listed as the sides
    of element 1 other than ``alpha`` followed by those of element 2 other
    than ``beta``, each in left, right, bottom, top order.
    """
    m = T1.shape[0] // 4

    def sl(s):
        return np.arange(s * m, (s + 1) * m)

    E1 = np.concatenate([sl(s) for s in range(4) if s != alpha])
    E2 = np.concatenate([sl(s) for s in range(4) if s != beta])
    a, b = sl(alpha), sl(beta)
    I = np.eye(m)
    Z = np.zeros
    A = np.block([[I, -T1[np.ix_(a, a)]], [-T2[np.ix_(b, b)], I]])
    B = np.block([
        [T1[np.ix_(a, E1)], Z((m, E2.size))],
        [Z((m, E1.size)), T2[np.ix_(b, E2)]],
    ])
    # x = [incoming of element 2 on beta, incoming of element 1 on alpha]
    C = np.block([
        [Z((E1.size, m)), T1[np.ix_(E1, a)]],
        [T2[np.ix_(E2, b)], Z((E2.size, m))],
    ])
    D = np.block([
        [T1[np.ix_(E1, E1)], Z((E1.size, E2.size))],
        [Z((E2.size, E1.size)), T2[np.ix_(E2, E2)]],
    ])
    h = np.concatenate([H1[a], H2[b]])
    lu = _lu(A, "pair merge block")
    W = sla.lu_solve(lu, np.column_stack([B, h]))
    T_pair = D + C @ W[:, :-1]
    H_pair = np.concatenate([H1[E1], H2[E2]]) + C @ W[:, -1]
    return T_pair, H_pair


@dataclass(eq=False)
class GroupFactor:
    """Factorized diagonal block of one merge group and its couplings."""

    faces: list
    dofs: np.ndarray  # level-local dofs of the group
    lu: tuple = field(repr=False)
    B: np.ndarray = field(repr=False)
    b_dofs: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    c_dofs: np.ndarray = field(repr=False)

    def solve(self, v):
        return sla.lu_solve(self.lu, v)

    @property
    def nbytes(self):
        return self.lu[0].nbytes + self.lu[1].nbytes + self.B.nbytes + self.C.nbytes


@dataclass(eq=False)
class LevelFactor:
    level: int
    nA: int  # number of leading (eliminated) dofs
    groups: list

    @property
    def nbytes(self):
        return sum(g.nbytes for g in self.groups)

    def solve_A(self, vA):
        out = np.empty_like(vA, dtype=complex)
        for g in self.groups:
            out[g.dofs] = g.solve(vA[g.dofs])
        return out

    def apply_C(self, xA, nD):
        """``C_l xA`` as a trailing-block vector of length ``nD``."""
        out = np.zeros(nD, dtype=complex)
        for g in self.groups:
            if g.c_dofs.size:
                out[g.c_dofs] += g.C @ xA[g.dofs]
        return out

    def solve_A_B(self, s):
        """``A_l^{-1} B_l s`` for a trailing-block vector ``s``."""
        out = np.zeros(self.nA, dtype=complex)
        for g in self.groups:
            if g.b_dofs.size:
                out[g.dofs] = g.solve(g.B @ s[g.b_dofs])
        return out


def _dof_index(faces, start, bs):
    if not faces:
        return np.zeros(0, dtype=int)
    f = np.asarray(faces) - start
    return (f[:, None] * bs + np.arange(bs)[None, :]).reshape(-1)


def eliminate_level(matrix, graph, level):
    """Eliminate the faces of ``level`` from ``matrix`` (= ``M_level``).

    Returns the :class:`LevelFactor` holding the group factorizations and
    the Schur complement ``M_{level+1} = D - C A^{-1} B`` as a
    :class:`BlockMatrix`.
    """
    A, B, C, D = partition_level(matrix, graph, level)
    bs = matrix.bs
    lo = matrix.start
    hi = lo + len(graph.levels[level - 1])
    nA = (hi - lo) * bs
    nxt = BlockMatrix(hi, matrix.nfaces - (hi - lo), bs, {k: v.copy() for k, v in D.items()})
    b_cols, c_rows = {}, {}
    for (i, j) in B:
        b_cols.setdefault(i, set()).add(j)
    for (i, j) in C:
        c_rows.setdefault(j, set()).add(i)
    groups = []
    for ids in graph.groups[level - 1]:
        Ag = matrix.submatrix(ids, ids)
        lu = _lu(Ag, f"merge block of faces {ids}")
        cols = sorted(set().union(*(b_cols.get(f, set()) for f in ids)))
        rows = sorted(set().union(*(c_rows.get(f, set()) for f in ids)))
        Bg = matrix.submatrix(ids, cols)
        Cg = matrix.submatrix(rows, ids)
        groups.append(GroupFactor(
            faces=list(ids),
            dofs=_dof_index(ids, lo, bs),
            lu=lu,
            B=Bg,
            b_dofs=_dof_index(cols, hi, bs),
            C=Cg,
            c_dofs=_dof_index(rows, hi, bs),
        ))
        if rows and cols:
            upd = Cg @ sla.lu_solve(lu, Bg)
            for a, i in enumerate(rows):
                ra = slice(a * bs, (a + 1) * bs)
                for b, j in enumerate(cols):
                    nxt.add(i, j, -upd[ra, b * bs:(b + 1) * bs])
    return LevelFactor(level, nA, groups), nxt


@dataclass(eq=False)
class MergeHierarchy:
    """Factorizations of levels ``1..len(levels)`` and the matrices ``M_l``.

    ``matrices[k]`` is ``M_{k+1}``; the last one is the system left after
    the stored eliminations.  ``coarse_lu`` is set once the final level is
    reduced to a dense factorization.
    """

    graph: object
    levels: list
    matrices: list
    coarse_lu: tuple = None

    @property
    def num_levels(self):
        return self.graph.num_levels

    @property
    def complete(self):
        return self.coarse_lu is not None

    def matrix(self, level):
        return self.matrices[level - 1]

    def memory_bytes(self, depth=None, exact=False, keep_intermediate=False):
        """Bytes retained by a solver that eliminates the levels below ``depth``.

        Counts the factors and coupling blocks of those levels plus the
        blocks of ``M_depth``.  An ``exact`` coarse solve instead keeps the
        remaining factors and the final LU.  ``keep_intermediate`` adds the
        matrices ``M_2 .. M_{depth-1}`` needed by gamma-cycles.
        """
        L = self.num_levels
        if depth is None:
            depth = L
        if exact:
            total = sum(lv.nbytes for lv in self.levels)
            total += self.coarse_lu[0].nbytes + self.coarse_lu[1].nbytes
        else:
            total = sum(lv.nbytes for lv in self.levels[: depth - 1])
            total += self.matrix(depth).nbytes
        if keep_intermediate:
            total += sum(M.nbytes for M in self.matrices[1:depth - 1])
        return total


def build_hierarchy(system, upto=None, factor_coarse=True):
    """Eliminate levels ``1..upto`` of the skeleton system.

    With ``upto=None`` every level but the last is eliminated and the last
    (dense) system is LU-factorized when ``factor_coarse`` is set, which
    yields the nested-dissection direct solver.
    """
    graph = system.graph
    L = graph.num_levels
    if upto is None:
        upto = L - 1
    if not 0 <= upto <= L - 1:
        raise ValueError(f"can eliminate 0..{L - 1} levels, asked for {upto}")
    levels, matrices = [], [system.matrix]
    M = system.matrix
    for level in range(1, upto + 1):
        lf, M = eliminate_level(M, graph, level)
        levels.append(lf)
        matrices.append(M)
    h = MergeHierarchy(graph, levels, matrices)
    if upto == L - 1 and factor_coarse:
        h.coarse_lu = _lu(M.todense(), "final coarse system")
    return h


def forward(hier, rhs, level):
    """Reduce a level-``level`` right-hand side to the next level."""
    lf = hier.levels[level - 1]
    hA = rhs[: lf.nA]
    return rhs[lf.nA:] - lf.apply_C(lf.solve_A(hA), rhs.size - lf.nA)


def backward(hier, rhs, x_next, level):
    lf = hier.levels[level - 1]
    xA = lf.solve_A(rhs[: lf.nA] - _apply_B(lf, x_next))
    return np.concatenate([xA, x_next])


def _apply_B(lf, s):
    out = np.zeros(lf.nA, dtype=complex)
    for g in lf.groups:
        if g.b_dofs.size:
            out[g.dofs] = g.B @ s[g.b_dofs]
    return out


def direct_solve(hier, rhs, level=1):
    """Nested-dissection solve of ``M_level x = rhs``."""
    if not hier.complete:
        raise RuntimeError("hierarchy is not fully factorized")
    rhs = np.asarray(rhs, dtype=complex)
    stack = []
    r = rhs
    for lv in range(level, hier.num_levels):
        stack.append(r)
        r = forward(hier, r, lv)
    x = sla.lu_solve(hier.coarse_lu, r)
    for lv in range(hier.num_levels - 1, level - 1, -1):
        x = backward(hier, stack.pop(), x, lv)
    return x
