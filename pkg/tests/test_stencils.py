"""Exact-arithmetic checks of the kernel chain and its reference tables."""

import math

import numpy as np
import pytest

from helmdef.stencils import (
    LAPLACE_LEVEL1,
    MASS_LEVEL1,
    PROLONG_DENOMINATOR_1D,
    PROLONG_NUMERATORS_1D,
    REFERENCE_KERNELS,
    RESTRICT_DENOMINATOR_1D,
    StencilKernel,
    galerkin_coarsen,
    level_kernels,
    verify_chain,
)

EXACT_LIMIT = 2**53


def test_level1_kernels():
    assert LAPLACE_LEVEL1.radius == 1
    assert LAPLACE_LEVEL1.denominator == 1
    assert LAPLACE_LEVEL1.numerators[1][1] == 4
    assert MASS_LEVEL1.coefficient_sum() == 1


def test_level2_is_radius2():
    lap, mass = level_kernels(2)
    assert lap.radius == 2 and mass.radius == 2
    assert lap.denominator == 1024
    assert mass.denominator == 4096
    # corner values fixed by the chain
    assert lap.numerators[0][0] == -3
    assert mass.numerators[0][0] == 1


@pytest.mark.parametrize("level", [3, 4, 5, 6])
def test_chain_matches_reference_exactly_below_2_53(level):
    lap, mass = level_kernels(level)
    for kind, kern in (("laplace", lap), ("mass", mass)):
        ref_rows, ref_denom = REFERENCE_KERNELS[level][kind]
        assert kern.denominator == ref_denom
        assert kern.radius == 3
        for r in range(7):
            for c in range(7):
                want = ref_rows[r][c]
                got = kern.numerators[r][c]
                if abs(want) <= EXACT_LIMIT:
                    assert got == want, (level, kind, r, c)


def test_level6_mass_reference_entries_above_2_53_are_float_rounded():
    # the oversized reference entries carry float64 rounding; the derived
    # exact integers must sit within 3 ulp of them
    _, mass = level_kernels(6)
    ref_rows, _ = REFERENCE_KERNELS[6]["mass"]
    n_large = 0
    n_mismatch = 0
    for r in range(7):
        for c in range(7):
            want = ref_rows[r][c]
            got = mass.numerators[r][c]
            if abs(want) > EXACT_LIMIT:
                n_large += 1
                n_mismatch += got != want
                assert abs(got - want) <= 3 * math.ulp(float(abs(got)))
            else:
                assert got == want
    assert n_large == 25
    assert n_mismatch == 21
    # the reference table is not even symmetric there, so the deviation is
    # rounding noise in the reference, not in the chain
    ref = np.array(ref_rows, dtype=object)
    assert not np.array_equal(ref, ref.T)


def test_chain_is_symmetric_and_conservative():
    for level in range(1, 7):
        lap, mass = level_kernels(level)
        assert lap.is_symmetric()
        assert mass.is_symmetric()
        assert lap.coefficient_sum() == 0  # zero action on interior constants
        assert mass.coefficient_sum() == 4 ** (level - 1) * mass.denominator


def test_galerkin_coarsen_example_values():
    lap4, mass4 = galerkin_coarsen(*level_kernels(3))
    assert lap4.numerators[0][0] == -10395
    assert lap4.denominator == 4096 * 1024 * 1024
    assert mass4.numerators[0][0] == 27225
    lap5, _ = galerkin_coarsen(lap4, mass4)
    assert lap5.numerators[0][0] == -13491387
    lap6, mass6 = galerkin_coarsen(*level_kernels(5))
    assert lap6.numerators[0][0] == -14618265915
    assert mass6.numerators[0][0] == 706549519225


def test_verify_chain_clean():
    results = verify_chain()
    assert all(r["within_ulp"] for r in results)
    exact = [r for r in results if r["exact_match"]]
    # everything exact except the level-6 mass table
    assert len(exact) == len(results) - 1
    (inexact,) = [r for r in results if not r["exact_match"]]
    assert (inexact["level"], inexact["kind"]) == (6, "mass")


def test_verify_chain_detects_perturbation():
    def perturbed(level):
        lap, mass = level_kernels(level)
        if level == 4:
            rows = [list(r) for r in lap.numerators]
            rows[0][0] += 1
            lap = StencilKernel(tuple(tuple(r) for r in rows), lap.denominator, lap.h_power)
        return lap, mass

    results = verify_chain(kernels=perturbed)
    bad = [r for r in results if not r["within_ulp"]]
    assert len(bad) == 1
    assert bad[0]["level"] == 4 and bad[0]["kind"] == "laplace"
    assert bad[0]["first_mismatch"][:2] == (0, 0)


def test_transfer_weight_constants():
    assert PROLONG_NUMERATORS_1D == (1, 4, 6, 4, 1)
    assert sum(PROLONG_NUMERATORS_1D) == 2 * PROLONG_DENOMINATOR_1D
    assert sum(PROLONG_NUMERATORS_1D) == RESTRICT_DENOMINATOR_1D


def test_invalid_kernels_rejected():
    with pytest.raises(ValueError):
        StencilKernel(((1, 2), (3, 4)), 1, 0)  # even side
    with pytest.raises(ValueError):
        StencilKernel(((0, 1, 0), (1, 1, 1), (0, 1, 0)), 3, 0)  # non power of two
