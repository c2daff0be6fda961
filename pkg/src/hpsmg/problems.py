"""Problem instances, solution recovery and field diagnostics."""

from dataclasses import dataclass
import csv
from pathlib import Path

import numpy as np

from .element import build_index_sets, local_solve
from .skeleton import Mesh, assemble_skeleton, build_elements, build_face_graph, element_grid
from .spectral import gll_rule

FIELD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ProblemSpec:
    """Data of ``-lap(u) - kappa^2 (1 - b) u = s`` with ``du/dn + i eta u = t``."""

    kind: str
    kappa: float
    eta: float
    b: object
    s: object
    t: object
    exact: object = None

    def coefficient(self, x, y):
        return self.kappa**2 * (1.0 - self.b(x, y))


def bump_problem(kappa):
    """Scattering of ``exp(i kappa x)`` by a Gaussian bump; zero impedance data."""
    kappa = float(kappa)

    def b(x, y):
        return 1.5 * np.exp(-160.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))

    def s(x, y):
        return -(kappa**2) * b(x, y) * np.exp(1j * kappa * x)

    def t(x, y, nx, ny):
        return np.zeros(np.shape(x), dtype=complex)

    return ProblemSpec("bump", kappa, kappa, b, s, t)


def planewave_problem(kappa, theta=0.0):
    """Manufactured plane wave ``exp(i kappa (x cos(theta) + y sin(theta)))``."""
    kappa = float(kappa)
    kx, ky = kappa * np.cos(theta), kappa * np.sin(theta)

    def u(x, y):
        return np.exp(1j * (kx * x + ky * y))

    def t(x, y, nx, ny):
        return (1j * (kx * nx + ky * ny) + 1j * kappa) * u(x, y)

    def zero(x, y):
        return np.zeros(np.shape(x))

    return ProblemSpec("planewave", kappa, kappa, zero, zero, t, exact=u)


PROBLEMS = {"bump": bump_problem, "planewave": planewave_problem}


def wavenumber_from_ppw(ppw, n, N):
    """Wavenumber giving ``ppw`` grid points per wavelength on an ``n x n``, degree ``N`` mesh."""
    if not ppw > 2:
        raise ValueError(f"points per wavelength must exceed 2, got {ppw}")
    return 2.0 * np.pi * N * n / ppw


def make_mesh(spec, n, N):
    return Mesh(n, N, spec.kappa, spec.eta, spec.coefficient, spec.s, spec.t)


def discretize(spec, n, N):
    """Mesh, element operators and assembled skeleton system for ``spec``."""
    mesh = make_mesh(spec, n, N)
    graph = build_face_graph(mesh)
    elements = build_elements(mesh)
    return assemble_skeleton(mesh, elements, graph)


@dataclass(eq=False)
class GlobalField:
    """Corner-free nodal values of ``u`` per element, with node coordinates."""

    n: int
    N: int
    kappa: float
    x: np.ndarray  # (n*n, (N+1)^2 - 4)
    y: np.ndarray
    values: np.ndarray
    weights: np.ndarray


def _coords(mesh, elem, e):
    X, Y = element_grid(mesh, e)
    cf = elem.sets.corner_free
    return X.reshape(-1)[cf], Y.reshape(-1)[cf]


def recover_solution(system, g):
    """Local solves with the skeleton solution ``g`` as incoming boundary data."""
    mesh = system.mesh
    g = np.asarray(g, dtype=complex)
    if g.shape != (system.num_unknowns,):
        raise ValueError(f"skeleton vector has length {g.size}, expected {system.num_unknowns}")
    xs, ys, vals, ws = [], [], [], []
    for e, elem in enumerate(system.elements):
        u = local_solve(elem, system.incoming(g, e), system.sources[e])
        x, y = _coords(mesh, elem, e)
        xs.append(x)
        ys.append(y)
        vals.append(u)
        ws.append(elem.quadrature_weights())
    return GlobalField(mesh.n, mesh.N, mesh.kappa, np.array(xs), np.array(ys),
                       np.array(vals), np.array(ws))


def discrete_error(field, exact):
    """Quadrature-weighted relative L2 error and relative max-norm error."""
    ref = exact(field.x, field.y)
    diff = field.values - ref
    l2 = np.sqrt(np.sum(field.weights * np.abs(diff) ** 2) / np.sum(field.weights * np.abs(ref) ** 2))
    linf = np.max(np.abs(diff)) / np.max(np.abs(ref))
    return float(l2), float(linf)


def max_face_jump(field):
    """Largest difference of ``u`` between neighbours at shared face nodes."""
    n, N = field.n, field.N
    sets = build_index_sets(N)
    pos = {t: k for k, t in enumerate(sets.corner_free)}
    left = [pos[t] for t in sets.left]
    right = [pos[t] for t in sets.right]
    bottom = [pos[t] for t in sets.bottom]
    top = [pos[t] for t in sets.top]
    jump = 0.0
    for e in range(n * n):
        ix, iy = e % n, e // n
        if ix + 1 < n:
            jump = max(jump, np.max(np.abs(field.values[e, right] - field.values[e + 1, left])))
        if iy + 1 < n:
            jump = max(jump, np.max(np.abs(field.values[e, top] - field.values[e + n, bottom])))
    return float(jump)


def dump_field(field, path, format=None):
    """Write a field as CSV (``.csv``) or as an uncompressed ``.npz`` archive.

    CSV layout: ``# hpsmg-field v1 n=.. N=.. kappa=..`` then the column
    header ``element,x,y,re,im`` and one row per corner-free node.
    """
    path = Path(path)
    if field.values.size == 0:
        raise ValueError("refusing to write an empty field")
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "npz")
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                fh.write(f"# hpsmg-field v{FIELD_FORMAT_VERSION} n={field.n} N={field.N} "
                         f"kappa={field.kappa!r}\n")
                w = csv.writer(fh)
                w.writerow(["element", "x", "y", "re", "im"])
                for e in range(field.values.shape[0]):
                    for x, y, u in zip(field.x[e], field.y[e], field.values[e]):
                        w.writerow([e, repr(float(x)), repr(float(y)),
                                    repr(float(u.real)), repr(float(u.imag))])
        elif fmt == "npz":
            with open(path, "wb") as fh:
                np.savez(fh, version=FIELD_FORMAT_VERSION, n=field.n, N=field.N,
                         kappa=field.kappa, x=field.x, y=field.y, values=field.values,
                         weights=field.weights)
        else:
            raise ValueError(f"unknown field format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write field to {path}: {exc}") from exc
    return path


def read_field(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path) as fh:
            header = fh.readline().split()
            meta = dict(kv.split("=", 1) for kv in header if "=" in kv)
            n, N, kappa = int(meta["n"]), int(meta["N"]), float(meta["kappa"])
            rows = list(csv.reader(fh))[1:]
        data = np.array([[float(v) for v in r[1:]] for r in rows])
        shape = (n * n, (N + 1) ** 2 - 4)
        x, y = data[:, 0].reshape(shape), data[:, 1].reshape(shape)
        values = (data[:, 2] + 1j * data[:, 3]).reshape(shape)
        w = 0.5 / n * gll_rule(N).weights
        weights = np.tile(np.kron(w, w)[build_index_sets(N).corner_free], (n * n, 1))
        return GlobalField(n, N, kappa, x, y, values, weights)
    with np.load(path) as z:
        return GlobalField(int(z["n"]), int(z["N"]), float(z["kappa"]), z["x"], z["y"],
                           z["values"], z["weights"])
