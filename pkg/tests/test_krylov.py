import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hpsmg.krylov import KrylovBreakdown, KrylovConfig, fgmres, gmres, gmres_fixed


def _random_system(rng, n=50, shift=8.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) + shift * np.eye(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A, b


def test_identity_converges_in_one_step(rng):
    b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    x, rep = gmres(np.eye(20), b)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(x, b, atol=1e-14)


def test_zero_rhs_returns_zero():
    x, rep = gmres(np.eye(4), np.zeros(4))
    assert rep.converged and rep.iterations == 0 and not np.any(x)


def test_random_system_true_residual(rng):
    A, b = _random_system(rng)
    x, rep = gmres(A, b, KrylovConfig(restart=60, tol=1e-10))
    assert rep.converged
    true = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    assert true <= 1e-8
    assert rep.final_residual == pytest.approx(true, rel=1e-12)
    assert rep.residual_history[0] == 1.0
    assert all(b <= a * (1 + 1e-12) for a, b in zip(rep.residual_history, rep.residual_history[1:]))


@pytest.mark.parametrize("k", [1, 3, 7])
def test_k_distinct_eigenvalues_need_k_steps(rng, k):
    n = 40
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    eig = np.repeat(np.arange(1, k + 1) * (1 + 0.5j), n // k + 1)[:n]
    A = Q @ np.diag(eig) @ Q.conj().T
    _, rep = gmres(A, rng.standard_normal(n) + 0j, KrylovConfig(tol=1e-10))
    assert rep.converged and rep.iterations <= k


def test_arnoldi_basis_is_orthonormal(rng):
    A, b = _random_system(rng, shift=2.0)
    bases = []
    gmres(A, b, KrylovConfig(restart=30, tol=1e-10, max_iters=60), bases=bases)
    assert len(bases) >= 1
    for V in bases:
        G = V.conj() @ V.T
        assert np.abs(G - np.eye(len(V))).max() <= 1e-8


def test_restart_still_converges(rng):
    A, b = _random_system(rng, shift=10.0)
    x, rep = gmres(A, b, KrylovConfig(restart=5, tol=1e-9))
    assert rep.converged
    assert np.linalg.norm(b - A @ x) <= 1e-9 * np.linalg.norm(b) * (1 + 1e-6)


def test_max_iters_reports_non_convergence(rng):
    A, b = _random_system(rng, shift=0.0)
    _, rep = gmres(A, b, KrylovConfig(restart=5, tol=1e-12, max_iters=7))
    assert not rep.converged and rep.iterations == 7


def test_matches_scipy(rng):
    A, b = _random_system(rng)
    x, _ = gmres(A, b, KrylovConfig(restart=50, tol=1e-12))
    ref, info = spla.gmres(A, b, rtol=1e-12, restart=50, atol=0)
    assert info == 0
    assert np.linalg.norm(x - ref) <= 1e-9 * np.linalg.norm(ref)


def test_identity_preconditioned_fgmres_equals_gmres(rng):
    A, b = _random_system(rng)
    cfg = KrylovConfig(restart=50, tol=1e-10)
    x1, r1 = gmres(A, b, cfg)
    x2, r2 = fgmres(A, b, lambda v: v.copy(), cfg)
    assert r1.iterations == r2.iterations
    np.testing.assert_allclose(r1.residual_history, r2.residual_history, rtol=1e-10)
    np.testing.assert_allclose(x1, x2, rtol=0, atol=1e-12 * np.linalg.norm(x1))


def test_fixed_preconditioner_fgmres_matches_right_preconditioned_gmres(rng):
    A, b = _random_system(rng, shift=1.0)
    P = np.linalg.inv(np.diag(np.diag(A)))
    cfg = KrylovConfig(restart=50, tol=1e-9)
    x1, r1 = gmres(A, b, cfg, precond=P)
    x2, r2 = fgmres(A, b, P, cfg)
    assert r1.converged and r2.converged
    assert abs(r1.iterations - r2.iterations) <= 1


def test_exact_preconditioner_single_iteration(rng):
    A, b = _random_system(rng)
    Ainv = np.linalg.inv(A)
    x, rep = fgmres(A, b, lambda v: Ainv @ v, KrylovConfig(tol=1e-10))
    assert rep.iterations == 1
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_varying_preconditioner(rng):
    A, b = _random_system(rng)
    Ainv = np.linalg.inv(A)
    calls = []

    def noisy(v):
        calls.append(1)
        return Ainv @ v + 1e-3 * len(calls) * v

    x, rep = fgmres(A, b, noisy, KrylovConfig(tol=1e-10))
    assert rep.converged and rep.iterations <= 10
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) * (1 + 1e-6)


def test_initial_guess_used(rng):
    A, b = _random_system(rng)
    xs = np.linalg.solve(A, b)
    _, rep = gmres(A, b, x0=xs)
    assert rep.iterations == 0 and rep.converged


def test_breakdown_on_non_finite_operator():
    with pytest.raises(KrylovBreakdown):
        gmres(lambda v: np.full_like(v, np.nan), np.ones(3))


def test_gmres_fixed_is_a_minimal_residual_step(rng):
    A, b = _random_system(rng)
    x1 = gmres_fixed(A, b, 1)
    # one step minimizes |b - a A b| over a
    Ab = A @ b
    a = np.vdot(Ab, b) / np.vdot(Ab, Ab)
    np.testing.assert_allclose(x1, a * b, rtol=1e-12)
    res = [np.linalg.norm(b - A @ gmres_fixed(A, b, k)) for k in range(1, 6)]
    assert all(y <= x * (1 + 1e-12) for x, y in zip(res, res[1:]))
    assert not np.any(gmres_fixed(A, np.zeros(50), 3))


@pytest.mark.parametrize("kw", [dict(restart=0), dict(tol=0.0), dict(tol=1.5), dict(max_iters=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        KrylovConfig(**kw)


def test_sparse_operator(rng):
    A = sp.diags([np.full(99, -1.0), np.full(100, 4.0 + 1j), np.full(99, -1.0)], [-1, 0, 1]).tocsr()
    b = rng.standard_normal(100) + 0j
    x, rep = gmres(A, b, KrylovConfig(tol=1e-10))
    assert rep.converged and np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) * 1.01
