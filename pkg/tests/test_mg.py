"""Multigrid V-cycle behavior for the shifted-Laplace solve."""

import numpy as np
import pytest

from helmdef.grid import mp1_problem
from helmdef.mg import CslpMultigrid, MgConfig


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(8)


def _mg_for(prob, beta2, config=MgConfig()):
    lv = prob.hierarchy.level(1)
    return CslpMultigrid(
        lv.nx, lv.ny, lv.h, prob.hierarchy.ksq_at(1), prob.hierarchy.boundary,
        beta2=beta2, config=config,
    )


def _interior_rhs(shape, rng):
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    b[0, :] = b[-1, :] = b[:, 0] = b[:, -1] = 0.0
    return b


def test_zero_rhs_zero_result():
    prob = mp1_problem(k=10.0, n=33, ml=2)
    mgs = _mg_for(prob, beta2=0.5)
    x = mgs.vcycle(np.zeros((33, 33), dtype=np.complex128))
    assert not x.any()


def test_poisson_limit_one_cycle_halves_residual(rng):
    prob = mp1_problem(k=1e-12, n=65, ml=2, boundary="dirichlet")
    mgs = _mg_for(prob, beta2=0.0)
    b = _interior_rhs((65, 65), rng)
    x = mgs.vcycle(b)
    r = b - mgs.levels[0].op.apply(x)
    assert np.linalg.norm(b) / np.linalg.norm(r) >= 2.0


def test_poisson_contraction_up_to_129(rng):
    for n in (65, 129):
        prob = mp1_problem(k=1e-12, n=n, ml=2, boundary="dirichlet")
        mgs = _mg_for(prob, beta2=0.0)
        b = _interior_rhs((n, n), rng)
        x = np.zeros_like(b)
        prev = np.linalg.norm(b)
        for _ in range(5):
            x = x + mgs.vcycle(b - mgs.levels[0].op.apply(x))
            cur = np.linalg.norm(b - mgs.levels[0].op.apply(x))
            assert cur / prev <= 0.5
            prev = cur


def test_cslp_fixed_point_converges(rng):
    # beta2 = 0.5 keeps the shifted system multigrid friendly
    prob = mp1_problem(k=100.0, kh=0.625, ml=2)
    mgs = _mg_for(prob, beta2=0.5)
    M = mgs.levels[0].op
    b = rng.standard_normal(M.shape) + 1j * rng.standard_normal(M.shape)
    bn = np.linalg.norm(b)
    x = np.zeros_like(b)
    rel = 1.0
    for _ in range(400):
        r = b - M.apply(x)
        rel = np.linalg.norm(r) / bn
        if rel <= 1e-6:
            break
        x = x + mgs.vcycle(r)
    assert rel <= 1e-6


def test_vcycle_linear_in_rhs(rng):
    prob = mp1_problem(k=50.0, kh=0.625, ml=2)
    mgs = _mg_for(prob, beta2=0.5)
    shape = mgs.levels[0].op.shape
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    a, c = 1.3 - 0.7j, -0.4 + 2.1j
    lhs = mgs.vcycle(a * u + c * v)
    rhs = a * mgs.vcycle(u) + c * mgs.vcycle(v)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


def test_sub_hierarchy_depth_rules():
    prob = mp1_problem(k=10.0, n=65, ml=2)
    mgs = _mg_for(prob, beta2=0.5)
    # 65 -> 33 -> 17 -> 9 -> 5, stop at five points per direction
    assert mgs.depth == 5
    assert mgs.levels[-1].op.shape == (5, 5)
    assert mgs.levels[-1].lu is not None
    limited = _mg_for(prob, beta2=0.5, config=MgConfig(mg_levels=3))
    assert limited.depth == 3


def test_config_validation():
    with pytest.raises(ValueError):
        MgConfig(pre_smooth=0, post_smooth=0)
    with pytest.raises(ValueError):
        MgConfig(mg_levels=1)
