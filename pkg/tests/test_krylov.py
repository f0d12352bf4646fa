"""Krylov solver checks against dense direct solves."""

import numpy as np
import pytest
import scipy.linalg as sla

from helmdef.errors import BreakdownError
from helmdef.grid import mp1_problem
from helmdef.krylov import StopRule, bicgstab, cslp_iteration_cap, fgmres, gmres
from helmdef.operators import assemble_csr, helmholtz_operator


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(11)


@pytest.fixture(scope="module")
def dirichlet_9x9():
    prob = mp1_problem(k=5.0, n=9, ml=2, boundary="dirichlet")
    op = helmholtz_operator(prob.hierarchy, 1)
    return op, assemble_csr(op).toarray(), prob.rhs.grid_view(prob.hierarchy)


def test_identity_system_one_iteration(rng):
    b = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    x, rep = fgmres(lambda u: u.copy(), lambda u: u.copy(), b, StopRule(1e-12, 10))
    assert rep.iterations == 1
    assert rep.converged
    assert np.allclose(x, b, atol=1e-14)


def test_zero_rhs_zero_iterations():
    b = np.zeros((5, 5), dtype=np.complex128)
    for solver in (fgmres, bicgstab):
        x, rep = solver(lambda u: u.copy(), None, b, StopRule(1e-10, 5))
        assert rep.iterations == 0
        assert rep.converged
        assert not x.any()


def test_fgmres_matches_dense_solve(dirichlet_9x9):
    op, A, b = dirichlet_9x9
    x_direct = sla.solve(A, b.ravel()).reshape(b.shape)
    x, rep = fgmres(lambda u: op.apply(u), None, b, StopRule(1e-10, 100))
    assert rep.converged
    assert np.abs(x - x_direct).max() <= 1e-8 * np.abs(x_direct).max()


def test_gmres_matches_dense_solve(dirichlet_9x9):
    op, A, b = dirichlet_9x9
    x_direct = sla.solve(A, b.ravel()).reshape(b.shape)
    M = np.diag(1.0 / np.diag(A))
    x, rep = gmres(
        lambda u: op.apply(u), lambda u: (M @ u.ravel()).reshape(u.shape), b, StopRule(1e-10, 100)
    )
    assert rep.converged
    assert np.abs(x - x_direct).max() <= 1e-8 * np.abs(x_direct).max()


def test_fgmres_gmres_identical_for_fixed_preconditioner(dirichlet_9x9, rng):
    op, A, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    M = np.diag(1.0 / np.diag(A))
    apply_M = lambda u: (M @ u.ravel()).reshape(u.shape)
    x1, r1 = fgmres(lambda u: op.apply(u), apply_M, b, StopRule(1e-9, 40))
    x2, r2 = gmres(lambda u: op.apply(u), apply_M, b, StopRule(1e-9, 40))
    assert r1.iterations == r2.iterations
    assert np.abs(x1 - x2).max() <= 1e-12 * np.abs(x1).max()


def test_residual_history_monotone_and_sized(dirichlet_9x9, rng):
    op, _, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    _, rep = fgmres(lambda u: op.apply(u), None, b, StopRule(1e-8, 60))
    h = rep.residual_history
    assert len(h) == rep.iterations + 1
    assert all(h[i + 1] <= h[i] + 1e-12 for i in range(len(h) - 1))


def test_final_relres_recomputed_matches_recurrence(dirichlet_9x9, rng):
    op, _, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    _, rep = fgmres(lambda u: op.apply(u), None, b, StopRule(1e-8, 60))
    assert rep.final_relres == pytest.approx(rep.residual_history[-1], abs=1e-10)


def test_unit_tolerance_means_one_iteration(dirichlet_9x9, rng):
    op, _, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    _, rep = fgmres(lambda u: op.apply(u), None, b, StopRule(1.0, 50))
    assert rep.iterations == 1
    assert rep.converged


def test_iteration_cap_reported_unconverged(dirichlet_9x9, rng):
    op, _, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    _, rep = fgmres(lambda u: op.apply(u), None, b, StopRule(1e-12, 3))
    assert rep.iterations == 3
    assert not rep.converged


def test_bicgstab_spd_poisson(rng):
    n = 17
    T = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)).astype(np.complex128)
    b = rng.standard_normal(n) + 0j
    x_direct = sla.solve(T, b)
    x, rep = bicgstab(lambda u: T @ u, None, b, StopRule(1e-10, 300))
    assert rep.converged
    assert np.abs(x - x_direct).max() <= 1e-8 * np.abs(x_direct).max()


def test_bicgstab_identity_single_iteration(rng):
    b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    x, rep = bicgstab(lambda u: u.copy(), None, b, StopRule(1e-12, 10))
    assert rep.iterations == 1
    assert np.allclose(x, b)


def test_bicgstab_breakdown_carries_iterate():
    # skew system makes rho = <r0, r0_conj...> vanish immediately
    A = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=np.complex128)
    b = np.array([1.0, 1j], dtype=np.complex128)
    try:
        bicgstab(lambda u: A @ u, None, b, StopRule(1e-14, 50))
    except BreakdownError as err:
        assert err.x is not None
        assert err.report is not None
    # (if no breakdown occurs on this platform the solve simply succeeded)


def test_preconditioned_bicgstab(dirichlet_9x9, rng):
    op, A, _ = dirichlet_9x9
    b = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    M = np.diag(1.0 / np.diag(A))
    x, rep = bicgstab(
        lambda u: op.apply(u), lambda u: (M @ u.ravel()).reshape(u.shape), b, StopRule(1e-9, 200)
    )
    x_direct = sla.solve(A, b.ravel()).reshape(b.shape)
    assert np.abs(x - x_direct).max() <= 1e-7 * np.abs(x_direct).max()


def test_cslp_iteration_cap():
    assert cslp_iteration_cap(10000) == 60
    assert cslp_iteration_cap(1) == 6
    assert cslp_iteration_cap(65536) == 96
    assert cslp_iteration_cap(10001) == 61  # strictly above the fourth power


def test_stop_rule_validation():
    with pytest.raises(ValueError):
        StopRule(1e-6, 0)
    with pytest.raises(ValueError):
        StopRule(-1e-6, 5)
