"""Per-element operators and the impedance-to-impedance (ItI) map.

Corner nodes are dropped.  Element vectors are stored in the
*corner-free* order ``boundary + interior``, with the boundary sides in
the order left, right, bottom, top and each side listed by increasing
coordinate along it.

Impedance traces use the outward normal ``n`` of the element:
incoming data is ``du/dn + i*eta*u``, outgoing data is ``du/dn - i*eta*u``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .spectral import gll_rule, scale_to_element

LEFT, RIGHT, BOTTOM, TOP = range(4)
SIDE_NAMES = ("left", "right", "bottom", "top")
# outward unit normal of each side
NORMALS = ((-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0))


class SingularElementError(np.linalg.LinAlgError):
    """Local impedance problem could not be factorized."""


@dataclass(frozen=True)
class IndexSets:
    N: int
    left: np.ndarray
    right: np.ndarray
    bottom: np.ndarray
    top: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    corners: np.ndarray

    @property
    def corner_free(self):
        """Tensor indices in the element vector order (boundary, then interior)."""
        return np.concatenate([self.boundary, self.interior])

    @property
    def sides(self):
        return (self.left, self.right, self.bottom, self.top)

    @property
    def side_size(self):
        return self.N - 1


def build_index_sets(N):
    if N < 2:
        raise ValueError(f"need N >= 2 for interior nodes, got {N}")
    n1 = N + 1
    inner = np.arange(1, N)
    left = 0 * n1 + inner
    right = N * n1 + inner
    bottom = inner * n1 + 0
    top = inner * n1 + N
    interior = (inner[:, None] * n1 + inner[None, :]).reshape(-1)
    corners = np.array([0, N, N * n1, N * n1 + N])
    return IndexSets(
        N=N,
        left=left,
        right=right,
        bottom=bottom,
        top=top,
        boundary=np.concatenate([left, right, bottom, top]),
        interior=interior,
        corners=corners,
    )


def assemble_local_pde(ops, coeff, sets=None):
    """Weak-form operator of ``-lap(u) - c u`` restricted to corner-free nodes.

    ``ops`` is the ``(x, y)`` pair of :class:`ScaledOperators1D`; ``coeff``
    holds ``c`` on the ``(N+1) x (N+1)`` tensor grid (first axis x).
    Rows of boundary nodes are returned too but lose their corner columns,
    so they are only meaningful after replacement by impedance rows.
    """
    ox, oy = ops
    n1 = ox.mass.size
    coeff = np.asarray(coeff)
    if coeff.shape != (n1, n1) or oy.mass.size != n1:
        raise ValueError(f"coefficient grid {coeff.shape} does not match order {n1 - 1}")
    if sets is None:
        sets = build_index_sets(n1 - 1)
    mass2d = np.kron(ox.mass, oy.mass)
    Lt = (
        np.kron(ox.stiff, np.diag(oy.mass))
        + np.kron(np.diag(ox.mass), oy.stiff)
        - np.diag(coeff.reshape(-1) * mass2d)
    )
    cf = sets.corner_free
    return Lt[np.ix_(cf, cf)]


def build_impedance_operators(sets, ops, eta):
    """Outgoing and incoming impedance operators on corner-free vectors."""
    if not eta > 0:
        raise ValueError(f"impedance parameter must be positive, got {eta}")
    ox, oy = ops
    n1 = sets.N + 1
    if ox.mass.size != n1 or oy.mass.size != n1:
        raise ValueError("operator order does not match index sets")
    Dx = np.kron(ox.diff_scaled, np.eye(n1))
    Dy = np.kron(np.eye(n1), oy.diff_scaled)
    normal = np.vstack([
        -Dx[sets.left],
        Dx[sets.right],
        -Dy[sets.bottom],
        Dy[sets.top],
    ])[:, sets.corner_free]
    trace = np.eye(n1 * n1)[np.ix_(sets.boundary, sets.corner_free)]
    I_out = normal - 1j * eta * trace
    I_in = normal + 1j * eta * trace
    return I_out, I_in


@dataclass(eq=False)
class ElementOperators:
    N: int
    h: float
    eta: float
    origin: tuple
    coeff: np.ndarray
    sets: IndexSets
    L: np.ndarray
    L_tilde_interior: np.ndarray
    I_out: np.ndarray
    I_in: np.ndarray
    L_factor: tuple = field(repr=False, default=None)
    T: np.ndarray = field(repr=False, default=None)
    source_map: np.ndarray = field(repr=False, default=None)
    label: object = None

    @property
    def nb(self):
        return 4 * (self.N - 1)

    def H(self, b_interior):
        """Outgoing response to an interior source (zero boundary data)."""
        b_interior = np.asarray(b_interior)
        if not np.any(b_interior):
            return np.zeros(self.nb, dtype=complex)
        return self.source_map @ b_interior

    def nodes(self):
        """Physical ``(x, y)`` coordinates of the corner-free nodes."""
        r = gll_rule(self.N)
        xs = self.origin[0] + 0.5 * self.h * (r.nodes + 1.0)
        ys = self.origin[1] + 0.5 * self.h * (r.nodes + 1.0)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        cf = self.sets.corner_free
        return X.reshape(-1)[cf], Y.reshape(-1)[cf]

    def quadrature_weights(self):
        r = gll_rule(self.N)
        w = 0.5 * self.h * r.weights
        return np.kron(w, w)[self.sets.corner_free]


def build_iti_map(elem):
    """Factorize ``L`` and form the ItI map ``T`` and the source map."""
    try:
        lu = sla.lu_factor(elem.L, check_finite=True)
    except ValueError as exc:  # non-finite entries
        raise SingularElementError(f"element {elem.label}: {exc}") from exc
    diag = np.abs(np.diag(lu[0]))
    if diag.min() <= np.finfo(float).eps * diag.max() * elem.L.shape[0]:
        raise SingularElementError(
            f"element {elem.label}: local impedance operator is singular "
            f"(pivot ratio {diag.min() / diag.max():.2e})"
        )
    nb = elem.nb
    # columns of L^{-1} for boundary data and for interior sources
    Linv_cols = sla.lu_solve(lu, np.eye(elem.L.shape[0], dtype=complex))
    elem.L_factor = lu
    elem.T = elem.I_out @ Linv_cols[:, :nb]
    elem.source_map = elem.I_out @ Linv_cols[:, nb:]
    return elem


def build_element(N, h, origin, coeff, eta, label=None):
    """Assemble all local operators of one square element.

    ``coeff`` is either a callable ``c(x, y)`` or an array of samples on the
    element's tensor GLL grid.
    """
    rule = gll_rule(N)
    ox = scale_to_element(rule, h)
    sets = build_index_sets(N)
    if callable(coeff):
        xs = origin[0] + 0.5 * h * (rule.nodes + 1.0)
        ys = origin[1] + 0.5 * h * (rule.nodes + 1.0)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        coeff = np.broadcast_to(coeff(X, Y), X.shape)
    coeff = np.asarray(coeff, dtype=complex)
    Lt = assemble_local_pde((ox, ox), coeff, sets)
    I_out, I_in = build_impedance_operators(sets, (ox, ox), eta)
    nb = 4 * (N - 1)
    L = np.vstack([I_in, Lt[nb:]])
    elem = ElementOperators(
        N=N,
        h=float(h),
        eta=float(eta),
        origin=tuple(origin),
        coeff=coeff,
        sets=sets,
        L=L,
        L_tilde_interior=Lt[nb:],
        I_out=I_out,
        I_in=I_in,
        label=label,
    )
    return build_iti_map(elem)


def local_solve(elem, g, b_interior):
    """Solve ``L u = [g; b]`` with the stored factorization."""
    if elem.L_factor is None:
        raise RuntimeError(f"element {elem.label} has no factorization")
    g = np.asarray(g)
    b_interior = np.asarray(b_interior)
    if g.shape != (elem.nb,) or b_interior.shape != ((elem.N - 1) ** 2,):
        raise ValueError("boundary data or interior source has the wrong length")
    return sla.lu_solve(elem.L_factor, np.concatenate([g, b_interior]).astype(complex))
