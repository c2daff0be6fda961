"""Face graph, nested-dissection face ordering and the global skeleton system.

Elements of an ``n x n`` mesh on the unit square are numbered row by row,
``e = ix + n * iy``.  Every interior face joins ``e1`` (left or bottom) and
``e2`` (right or top); its unknown is the pair
``(incoming data of e2, incoming data of e1)`` on that face, each of length
``N - 1``.

Across a face the outward normals are opposite, so the incoming data of one
element is the *negated* outgoing data of its neighbour.  The skeleton
therefore works with the transfer maps ``-T`` and ``-H`` of each element,
which send incoming data to the neighbour's incoming data; with them the
face equations have identity diagonal blocks and ``-T`` couplings.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .element import BOTTOM, LEFT, NORMALS, RIGHT, TOP, build_element, build_index_sets
from .spectral import gll_rule


@dataclass(eq=False)
class Mesh:
    """Uniform ``n x n`` mesh of degree-``N`` elements on (0, 1)^2.

    ``coefficient(x, y)`` is ``c`` in ``-lap(u) - c u = s``; ``source(x, y)``
    is ``s``; ``boundary(x, y, nx, ny)`` is the impedance data
    ``du/dn + i*eta*u`` on the physical boundary.
    """

    n: int
    N: int
    kappa: float
    eta: float
    coefficient: object
    source: object = None
    boundary: object = None

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"elements per side must be a power of two >= 2, got {self.n}")
        if self.N < 2:
            raise ValueError(f"polynomial degree must be >= 2, got {self.N}")

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def num_elements(self):
        return self.n * self.n

    @property
    def num_levels(self):
        return 2 * (self.n.bit_length() - 1)

    def origin(self, e):
        return ((e % self.n) * self.h, (e // self.n) * self.h)

    def neighbour(self, e, side):
        ix, iy = e % self.n, e // self.n
        dx, dy = NORMALS[side]
        jx, jy = ix + int(dx), iy + int(dy)
        if 0 <= jx < self.n and 0 <= jy < self.n:
            return jx + self.n * jy
        return None


@dataclass(frozen=True)
class Face:
    e1: int
    alpha: int
    e2: int
    beta: int
    level: int
    group: int


@dataclass(eq=False)
class FaceGraph:
    faces: list
    levels: list  # levels[k] = face ids eliminated at level k+1
    groups: list  # groups[k] = list of face-id lists, one per merge
    slot: dict  # (element, side) -> (face id, 0 or 1); absent on the boundary
    boundary_sides: list

    @property
    def num_levels(self):
        return len(self.levels)

    @property
    def level_sizes(self):
        return [len(lv) for lv in self.levels]

    def level_start(self, level):
        """First face id of ``level`` (1-based); faces of deeper levels follow."""
        return sum(len(lv) for lv in self.levels[: level - 1])


def build_face_graph(mesh):
    """Partition interior faces into elimination levels and order them.

    Odd levels merge subdomains left/right across vertical faces, even
    levels merge them bottom/top across horizontal faces.  Faces shared by
    the same pair of subdomains form one group and are kept contiguous.
    Groups of vertical-face levels are listed row-major over subdomain
    blocks, groups of horizontal-face levels column-major; inside a group
    faces run along the separator.
    """
    n = mesh.n
    m = n.bit_length() - 1
    if n < 2 or 2**m != n:
        raise ValueError(f"elements per side must be a power of two >= 2, got {n}")
    faces, levels, groups = [], [], []
    for k in range(1, m + 1):
        half, width = 2 ** (k - 1), 2**k
        # vertical separators: merge blocks of width `half` and height `half`
        lv, grp = [], []
        for by in range(n // half):
            for bx in range(n // width):
                cut = bx * width + half  # first column right of the separator
                ids = []
                for iy in range(by * half, (by + 1) * half):
                    e1 = (cut - 1) + n * iy
                    faces.append(Face(e1, RIGHT, e1 + 1, LEFT, 2 * k - 1, len(grp)))
                    ids.append(len(faces) - 1)
                grp.append(ids)
                lv.extend(ids)
        levels.append(lv)
        groups.append(grp)
        # horizontal separators: blocks of width `width`, height `half`
        lv, grp = [], []
        for bx in range(n // width):
            for by in range(n // width):
                cut = by * width + half
                ids = []
                for ix in range(bx * width, (bx + 1) * width):
                    e1 = ix + n * (cut - 1)
                    faces.append(Face(e1, TOP, e1 + n, BOTTOM, 2 * k, len(grp)))
                    ids.append(len(faces) - 1)
                grp.append(ids)
                lv.extend(ids)
        levels.append(lv)
        groups.append(grp)
    slot = {}
    for f, face in enumerate(faces):
        slot[(face.e2, face.beta)] = (f, 0)
        slot[(face.e1, face.alpha)] = (f, 1)
    boundary_sides = [
        (e, s) for e in range(n * n) for s in range(4) if (e, s) not in slot
    ]
    return FaceGraph(faces, levels, groups, slot, boundary_sides)


class BlockMatrix:
    """Square block-sparse matrix over a contiguous range of faces.

    ``blocks[(i, j)]`` is the dense ``bs x bs`` coupling between global face
    ids ``i`` and ``j``; face ``f`` occupies rows ``(f - start) * bs`` onward.
    """

    def __init__(self, start, nfaces, bs, blocks=None):
        self.start = start
        self.nfaces = nfaces
        self.bs = bs
        self.blocks = {} if blocks is None else blocks
        self._csr = None

    @property
    def shape(self):
        k = self.nfaces * self.bs
        return (k, k)

    @property
    def dtype(self):
        return np.dtype(complex)

    def add(self, i, j, block):
        cur = self.blocks.get((i, j))
        if cur is None:
            self.blocks[(i, j)] = np.array(block, dtype=complex)
        else:
            cur += block
        self._csr = None

    def dofs(self, f):
        o = (f - self.start) * self.bs
        return slice(o, o + self.bs)

    def tocsr(self):
        if self._csr is None:
            bs, s = self.bs, self.start
            if not self.blocks:
                self._csr = sp.csr_matrix(self.shape, dtype=complex)
                return self._csr
            keys = sorted(self.blocks)
            rows = np.array([i - s for i, _ in keys])
            cols = np.array([j - s for _, j in keys])
            data = np.stack([self.blocks[k] for k in keys])
            indptr = np.searchsorted(rows, np.arange(self.nfaces + 1))
            self._csr = sp.bsr_matrix(
                (data, cols, indptr), shape=self.shape, blocksize=(bs, bs)
            ).tocsr()
        return self._csr

    def matvec(self, v):
        return self.tocsr() @ v

    __matmul__ = matvec

    def todense(self):
        return self.tocsr().toarray()

    def pattern(self, faces=None):
        """Boolean face-level sparsity pattern (optionally of a sub-range)."""
        faces = list(range(self.start, self.start + self.nfaces)) if faces is None else list(faces)
        pos = {f: k for k, f in enumerate(faces)}
        P = np.zeros((len(faces), len(faces)), dtype=bool)
        for (i, j), blk in self.blocks.items():
            if i in pos and j in pos and np.any(blk):
                P[pos[i], pos[j]] = True
        return P

    @property
    def nbytes(self):
        return sum(b.nbytes for b in self.blocks.values())

    def submatrix(self, rows, cols):
        """Dense sub-matrix over the given face lists."""
        bs = self.bs
        out = np.zeros((len(rows) * bs, len(cols) * bs), dtype=complex)
        cpos = {f: k for k, f in enumerate(cols)}
        for a, i in enumerate(rows):
            for j, k in cpos.items():
                blk = self.blocks.get((i, j))
                if blk is not None:
                    out[a * bs:(a + 1) * bs, k * bs:(k + 1) * bs] = blk
        return out


@dataclass(eq=False)
class SkeletonSystem:
    mesh: Mesh
    graph: FaceGraph
    elements: list
    matrix: BlockMatrix
    rhs: np.ndarray
    sources: list = field(repr=False)  # weighted interior source per element
    boundary_data: dict = field(repr=False)  # (element, side) -> incoming data

    @property
    def side_size(self):
        return self.mesh.N - 1

    @property
    def num_unknowns(self):
        return self.rhs.size

    def incoming(self, g, e):
        """Incoming impedance data on all four sides of element ``e``."""
        m = self.side_size
        bs = 2 * m
        out = np.empty(4 * m, dtype=complex)
        for s in range(4):
            loc = self.graph.slot.get((e, s))
            if loc is None:
                out[s * m:(s + 1) * m] = self.boundary_data[(e, s)]
            else:
                f, k = loc
                o = f * bs + k * m
                out[s * m:(s + 1) * m] = g[o:o + m]
        return out


def element_grid(mesh, e):
    r = gll_rule(mesh.N)
    ox, oy = mesh.origin(e)
    xs = ox + 0.5 * mesh.h * (r.nodes + 1.0)
    ys = oy + 0.5 * mesh.h * (r.nodes + 1.0)
    return np.meshgrid(xs, ys, indexing="ij")


def build_elements(mesh):
    """Element operators for every mesh element; equal samples share one build."""
    cache = {}
    elements = []
    for e in range(mesh.num_elements):
        X, Y = element_grid(mesh, e)
        c = np.asarray(np.broadcast_to(mesh.coefficient(X, Y), X.shape), dtype=complex)
        key = c.tobytes()
        elem = cache.get(key)
        if elem is None:
            elem = build_element(mesh.N, mesh.h, mesh.origin(e), c, mesh.eta, label=e)
            cache[key] = elem
        elements.append(elem)
    return elements


def element_source(mesh, elem, e):
    """Interior right-hand side: ``s`` at interior nodes times quadrature weights."""
    nint = (mesh.N - 1) ** 2
    if mesh.source is None:
        return np.zeros(nint, dtype=complex)
    X, Y = element_grid(mesh, e)
    s = np.broadcast_to(mesh.source(X, Y), X.shape).reshape(-1)
    w = 0.5 * mesh.h * gll_rule(mesh.N).weights
    wq = np.kron(w, w)
    idx = elem.sets.interior
    return (s[idx] * wq[idx]).astype(complex)


def side_boundary_data(mesh, e, side):
    m = mesh.N - 1
    if mesh.boundary is None:
        return np.zeros(m, dtype=complex)
    X, Y = element_grid(mesh, e)
    idx = build_index_sets(mesh.N).sides[side]
    nx, ny = NORMALS[side]
    x, y = X.reshape(-1)[idx], Y.reshape(-1)[idx]
    return np.asarray(np.broadcast_to(mesh.boundary(x, y, nx, ny), x.shape), dtype=complex)


def assemble_skeleton(mesh, elements, graph=None):
    """Assemble ``M g = RHS`` from the face equations of every interior face."""
    if graph is None:
        graph = build_face_graph(mesh)
    if len(elements) != mesh.num_elements or any(el is None for el in elements):
        raise ValueError("missing element operators")
    m = mesh.N - 1
    bs = 2 * m
    nf = len(graph.faces)
    M = BlockMatrix(0, nf, bs)
    rhs = np.zeros(nf * bs, dtype=complex)
    sources = [element_source(mesh, elements[e], e) for e in range(mesh.num_elements)]
    # transfer maps: incoming data -> neighbour's incoming data
    H = [-elements[e].H(sources[e]) for e in range(mesh.num_elements)]
    bdata = {(e, s): side_boundary_data(mesh, e, s) for e, s in graph.boundary_sides}
    eye = np.eye(m)

    def side(s):
        return slice(s * m, (s + 1) * m)

    for f, face in enumerate(graph.faces):
        # row 0: outgoing of e1 on alpha; row 1: outgoing of e2 on beta
        for r, (e, a, k_other) in enumerate(((face.e1, face.alpha, 0), (face.e2, face.beta, 1))):
            T = -elements[e].T
            rows = slice(f * bs + r * m, f * bs + (r + 1) * m)
            blk = np.zeros((bs, bs), dtype=complex)
            blk[r * m:(r + 1) * m, k_other * m:(k_other + 1) * m] = eye
            M.add(f, f, blk)
            rhs[rows] += H[e][side(a)]
            for g in range(4):
                loc = graph.slot.get((e, g))
                Tag = T[side(a), side(g)]
                if loc is None:
                    rhs[rows] += Tag @ bdata[(e, g)]
                else:
                    f2, k = loc
                    blk = np.zeros((bs, bs), dtype=complex)
                    blk[r * m:(r + 1) * m, k * m:(k + 1) * m] = -Tag
                    M.add(f, f2, blk)
    return SkeletonSystem(mesh, graph, elements, M, rhs, sources, bdata)


def partition_level(matrix, graph, level):
    """Split the level-``level`` matrix into ``A, B, C, D`` block views.

    Returns four dicts of blocks keyed by global face pairs.  ``A`` is
    checked to be block-diagonal by merge group.
    """
    lo = graph.level_start(level)
    hi = lo + len(graph.levels[level - 1])
    if matrix.start != lo:
        raise AssertionError(f"matrix starts at face {matrix.start}, level {level} at {lo}")
    group_of = {}
    for g, ids in enumerate(graph.groups[level - 1]):
        for f in ids:
            group_of[f] = g
    A, B, C, D = {}, {}, {}, {}
    for (i, j), blk in matrix.blocks.items():
        ai, aj = i < hi, j < hi
        if ai and aj:
            if group_of[i] != group_of[j]:
                raise AssertionError(
                    f"faces {i} and {j} of level {level} are coupled across merge groups"
                )
            A[(i, j)] = blk
        elif ai:
            B[(i, j)] = blk
        elif aj:
            C[(i, j)] = blk
        else:
            D[(i, j)] = blk
    return A, B, C, D
