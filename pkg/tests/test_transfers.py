"""Transfer operator checks against dense matrices."""

import numpy as np
import pytest

from helmdef.errors import LevelError
from helmdef.grid import ComplexField, mp1_problem
from helmdef.stencils import TRANSFER_ADJOINT_SCALE
from helmdef.transfers import (
    prolong,
    prolong_array,
    prolongation_matrix,
    restrict,
    restrict_array,
    restriction_matrix,
)

FINE = (17, 17)
COARSE = (9, 9)


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def test_restrict_partition_of_unity():
    ones = np.ones(FINE, dtype=np.complex128)
    out = restrict_array(ones)
    # interior coarse points see the full footprint
    assert np.allclose(out[2:-2, 2:-2], 1.0, rtol=0, atol=1e-15)


def test_restrict_zero_is_zero():
    assert not restrict_array(np.zeros(FINE, complex)).any()


def test_prolong_impulse_footprint():
    coarse = np.zeros(COARSE, dtype=np.complex128)
    coarse[4, 4] = 1.0
    fine = prolong_array(coarse, FINE)
    w = np.array([1, 4, 6, 4, 1]) / 8.0
    expected = np.zeros(FINE)
    expected[6:11, 6:11] = np.outer(w, w)
    assert np.allclose(fine, expected, rtol=0, atol=1e-15)


def test_prolong_constants_interior():
    ones = np.ones(COARSE, dtype=np.complex128)
    fine = prolong_array(ones, FINE)
    assert np.allclose(fine[2:-2, 2:-2], 1.0, rtol=0, atol=1e-14)


def test_matrix_agreement(rng):
    R = restriction_matrix(FINE, COARSE)
    P = prolongation_matrix(FINE, COARSE)
    v = rng.standard_normal(FINE) + 1j * rng.standard_normal(FINE)
    c = rng.standard_normal(COARSE) + 1j * rng.standard_normal(COARSE)
    assert np.allclose(restrict_array(v).ravel(), R @ v.ravel(), atol=1e-13)
    assert np.allclose(prolong_array(c, FINE).ravel(), P @ c.ravel(), atol=1e-13)


def test_adjoint_scale(rng):
    R = restriction_matrix(FINE, COARSE)
    P = prolongation_matrix(FINE, COARSE)
    assert np.allclose(P, TRANSFER_ADJOINT_SCALE * R.T, atol=1e-14)
    # unconjugated bilinear adjoint identity up to the documented scale
    v = rng.standard_normal(FINE) + 1j * rng.standard_normal(FINE)
    w = rng.standard_normal(COARSE) + 1j * rng.standard_normal(COARSE)
    lhs = np.sum(restrict_array(v) * w)
    rhs = np.sum(v * prolong_array(w, FINE)) / TRANSFER_ADJOINT_SCALE
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(rhs))


def test_linearity(rng):
    for op, shape_in, extra in (
        (restrict_array, FINE, ()),
        (lambda c: prolong_array(c, FINE), COARSE, ()),
    ):
        u = rng.standard_normal(shape_in) + 1j * rng.standard_normal(shape_in)
        v = rng.standard_normal(shape_in) + 1j * rng.standard_normal(shape_in)
        a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        lhs = op(a * u + b * v)
        rhs = a * op(u) + b * op(v)
        assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(rhs).max())


def test_field_level_tracking(rng):
    prob = mp1_problem(k=10.0, n=17, ml=3)
    hier = prob.hierarchy
    v = ComplexField(level=1, data=rng.standard_normal(17 * 17) + 0j)
    vc = restrict(v, hier)
    assert vc.level == 2 and vc.data.size == 9 * 9
    vf = prolong(vc, hier)
    assert vf.level == 1 and vf.data.size == 17 * 17
    v3 = restrict(restrict(v, hier), hier)
    assert v3.level == 3
    with pytest.raises(LevelError):
        restrict(v3, hier)
    with pytest.raises(LevelError):
        prolong(v, hier)
