import numpy as np
import pytest

from hpsmg.dissection import direct_solve
from hpsmg.problems import (
    GlobalField,
    ProblemSpec,
    bump_problem,
    discrete_error,
    discretize,
    dump_field,
    max_face_jump,
    planewave_problem,
    read_field,
    recover_solution,
    wavenumber_from_ppw,
)


def _solve(sys_):
    return recover_solution(sys_, np.linalg.solve(sys_.matrix.todense(), sys_.rhs))


def test_ppw_formula():
    # 2 pi N n / ppw
    assert wavenumber_from_ppw(9.6, 128, 8) == pytest.approx(670.2064327658225, rel=1e-12)
    assert wavenumber_from_ppw(9.6, 16, 8) == pytest.approx(83.7758040957278, rel=1e-12)
    with pytest.raises(ValueError):
        wavenumber_from_ppw(2.0, 4, 8)


def test_bump_data():
    p = bump_problem(10.0)
    assert p.b(0.5, 0.5) == pytest.approx(1.5)
    assert p.b(0.0, 0.0) == pytest.approx(1.5 * np.exp(-80.0))
    assert p.s(0.5, 0.5) == pytest.approx(-150.0 * np.exp(5j))
    assert p.coefficient(0.5, 0.5) == pytest.approx(-50.0)
    assert not np.any(p.t(np.zeros(3), np.zeros(3), 1.0, 0.0))


def test_zero_data_gives_zero_field():
    p = bump_problem(8.0)
    zero = lambda x, y: np.zeros(np.shape(x))  # noqa: E731
    spec = ProblemSpec("zero", p.kappa, p.eta, p.b, zero, p.t)
    f = _solve(discretize(spec, 2, 6))
    assert not np.any(f.values)


def test_planewave_is_recovered_to_spectral_accuracy():
    p = planewave_problem(20.0, theta=0.3)
    f = _solve(discretize(p, 4, 16))
    l2, linf = discrete_error(f, p.exact)
    assert l2 <= 1e-8 and linf <= 1e-8
    assert max_face_jump(f) <= 1e-7 * np.abs(f.values).max()


def test_error_decays_spectrally_with_degree():
    p = planewave_problem(15.0)
    errs = [discrete_error(_solve(discretize(p, 2, N)), p.exact)[0] for N in (4, 6, 8, 10)]
    assert all(b < 0.2 * a for a, b in zip(errs, errs[1:])), errs


def test_bump_field_continuity(bump_4x8, bump_4x8_hierarchy):
    f = recover_solution(bump_4x8, direct_solve(bump_4x8_hierarchy, bump_4x8.rhs))
    assert f.values.shape == (16, 81 - 4)
    assert max_face_jump(f) <= 1e-7 * np.abs(f.values).max()


def test_solution_is_linear_in_data():
    p = planewave_problem(9.0)
    q = bump_problem(9.0)
    flat = lambda x, y: np.zeros(np.shape(x))  # noqa: E731
    a, b = 1.5 - 0.5j, 0.25 + 2j
    pa = ProblemSpec("a", 9.0, 9.0, flat, flat, p.t)
    pb = ProblemSpec("b", 9.0, 9.0, flat, q.s, lambda *z: np.zeros(np.shape(z[0])))
    pab = ProblemSpec("ab", 9.0, 9.0, flat, lambda x, y: b * q.s(x, y),
                      lambda x, y, nx, ny: a * p.t(x, y, nx, ny))
    fa, fb, fab = (_solve(discretize(s, 2, 6)) for s in (pa, pb, pab))
    np.testing.assert_allclose(fab.values, a * fa.values + b * fb.values, atol=1e-10)


def test_discrete_error_trivial_cases(planewave_4x8):
    p = planewave_problem(10.0)
    f = _solve(planewave_4x8)
    exact = GlobalField(f.n, f.N, f.kappa, f.x, f.y, p.exact(f.x, f.y), f.weights)
    assert discrete_error(exact, p.exact) == (0.0, 0.0)
    doubled = GlobalField(f.n, f.N, f.kappa, f.x, f.y, 2 * p.exact(f.x, f.y), f.weights)
    l2, linf = discrete_error(doubled, p.exact)
    assert l2 == pytest.approx(1.0) and linf == pytest.approx(1.0)


def test_npz_round_trip_is_exact(planewave_4x8, tmp_path):
    f = _solve(planewave_4x8)
    g = read_field(dump_field(f, tmp_path / "u.npz"))
    for name in ("x", "y", "values", "weights"):
        np.testing.assert_array_equal(getattr(g, name), getattr(f, name))
    assert (g.n, g.N, g.kappa) == (f.n, f.N, f.kappa)


def test_csv_layout_and_round_trip(planewave_4x8, tmp_path):
    f = _solve(planewave_4x8)
    path = dump_field(f, tmp_path / "u.csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# hpsmg-field v1 n=4 N=8")
    assert lines[1] == "element,x,y,re,im"
    assert len(lines) == 16 * (81 - 4) + 2
    g = read_field(path)
    np.testing.assert_array_equal(g.values, f.values)
    np.testing.assert_allclose(g.weights, f.weights, rtol=1e-14)


def test_dump_rejects_empty_field_and_bad_path(planewave_4x8, tmp_path):
    f = _solve(planewave_4x8)
    empty = GlobalField(1, 2, 1.0, np.zeros((0, 5)), np.zeros((0, 5)), np.zeros((0, 5)), np.zeros((0, 5)))
    with pytest.raises(ValueError):
        dump_field(empty, tmp_path / "e.npz")
    with pytest.raises(OSError, match="cannot write"):
        dump_field(f, tmp_path / "missing" / "u.npz")
    with pytest.raises(ValueError):
        dump_field(f, tmp_path / "u.dat", format="hdf")


def test_recover_rejects_wrong_length(planewave_4x8):
    with pytest.raises(ValueError):
        recover_solution(planewave_4x8, np.zeros(3))
