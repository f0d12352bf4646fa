"""Exact-rational stencil kernels and the Galerkin coarsening chain.

Every interior kernel used by the solver is a square stencil with integer
numerators over a power-of-two denominator, so the whole coarsening chain can
be computed and checked in exact integer arithmetic.  Level 1 carries the
classic 5-point Laplacian plus a pointwise wavenumber term; level 2 is the
exact Galerkin triple product of the level-1 kernels with the higher-order
transfer weights; from level 3 on the kernels stay 7x7.

``verify_chain`` certifies the derived chain against the frozen reference
coefficient tables shipped below (``REFERENCE_KERNELS``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "StencilKernel",
    "LAPLACE_LEVEL1",
    "MASS_LEVEL1",
    "PROLONG_NUMERATORS_1D",
    "PROLONG_DENOMINATOR_1D",
    "RESTRICT_DENOMINATOR_1D",
    "TRANSFER_ADJOINT_SCALE",
    "galerkin_coarsen",
    "level_kernels",
    "verify_chain",
    "REFERENCE_KERNELS",
]

# 1D transfer numerators. Prolongation uses denominator 8 (each parity class
# sums to one), restriction uses 16 (full partition of unity), hence the 2D
# adjoint scale Z = 4 * R^T.
PROLONG_NUMERATORS_1D = (1, 4, 6, 4, 1)
PROLONG_DENOMINATOR_1D = 8
RESTRICT_DENOMINATOR_1D = 16
TRANSFER_ADJOINT_SCALE = 4.0


@dataclass(frozen=True)
class StencilKernel:
    """Square stencil with exact integer numerators.

    Parameters
    ----------
    numerators : tuple of tuple of int
        ``(2*radius+1) x (2*radius+1)`` integer coefficients, row-major.
    denominator : int
        Positive power of two shared by all coefficients.
    h_power : int
        ``-2`` for Laplace-like kernels (application divides by the level's
        squared mesh width), ``0`` for mass-like kernels.
    """

    numerators: tuple
    denominator: int
    h_power: int

    def __post_init__(self):
        n = len(self.numerators)
        if n % 2 == 0 or any(len(row) != n for row in self.numerators):
            raise ValueError("stencil must be square with odd side length")
        if self.denominator <= 0 or self.denominator & (self.denominator - 1):
            raise ValueError("denominator must be a positive power of two")

    @property
    def radius(self) -> int:
        return len(self.numerators) // 2

    def as_array(self) -> np.ndarray:
        """Exact integer coefficients as an object-dtype array."""
        return np.array(self.numerators, dtype=object)

    def as_float(self) -> np.ndarray:
        """Coefficients divided by the denominator, as float64."""
        return np.array(self.numerators, dtype=np.float64) / float(self.denominator)

    def is_symmetric(self) -> bool:
        """True if invariant under 90-degree rotation and reflections."""
        a = self.as_array()
        return (
            np.array_equal(a, a.T)
            and np.array_equal(a, a[::-1, :])
            and np.array_equal(a, np.rot90(a))
        )

    def coefficient_sum(self):
        """Exact integer sum of all numerators."""
        return sum(sum(row) for row in self.numerators)


def _to_rows(arr) -> tuple:
    return tuple(tuple(int(v) for v in row) for row in arr)


LAPLACE_LEVEL1 = StencilKernel(
    numerators=((0, -1, 0), (-1, 4, -1), (0, -1, 0)),
    denominator=1,
    h_power=-2,
)

MASS_LEVEL1 = StencilKernel(
    numerators=((0, 0, 0), (0, 1, 0), (0, 0, 0)),
    denominator=1,
    h_power=0,
)


def _triple_product(numerators: tuple) -> dict:
    """Exact Z^T S Z with stride-2 sampling and the /8 transfer numerators.

    Works on offset dictionaries of Python ints so the result never leaves
    exact arithmetic.  The output footprint never exceeds radius 3.
    """
    w = PROLONG_NUMERATORS_1D
    rin = len(numerators) // 2
    sten = {
        (x - rin, y - rin): numerators[y][x]
        for y in range(2 * rin + 1)
        for x in range(2 * rin + 1)
        if numerators[y][x] != 0
    }
    out = {}
    for dx in range(-3, 4):
        for dy in range(-3, 4):
            acc = 0
            for (ax, ay) in ((a, b) for a in range(-2, 3) for b in range(-2, 3)):
                wa = w[ax + 2] * w[ay + 2]
                for (sx, sy), sv in sten.items():
                    ex, ey = ax + sx - 2 * dx, ay + sy - 2 * dy
                    if -2 <= ex <= 2 and -2 <= ey <= 2:
                        acc += wa * sv * w[ex + 2] * w[ey + 2]
            out[(dx, dy)] = acc
    return out


def _reduce(entries: dict, denominator: int):
    while denominator % 2 == 0 and all(v % 2 == 0 for v in entries.values()):
        entries = {k: v // 2 for k, v in entries.items()}
        denominator //= 2
    return entries, denominator


def galerkin_coarsen(laplace: StencilKernel, mass: StencilKernel):
    """Coarsen a kernel pair by one level.

    Computes the exact triple product of each kernel with the higher-order
    transfer stencils and reduces the resulting fraction to its canonical
    power-of-two denominator.  Feeding the level-2 pair through this function
    repeatedly generates the 7x7 kernels of levels 3, 4, 5, ...

    Returns
    -------
    (StencilKernel, StencilKernel)
        The coarsened Laplace-like and mass-like kernels.
    """
    coarse = []
    for kern in (laplace, mass):
        entries = _triple_product(kern.numerators)
        denom = kern.denominator * (PROLONG_DENOMINATOR_1D**2) ** 2
        entries, denom = _reduce(entries, denom)
        radius = max(
            (max(abs(dx), abs(dy)) for (dx, dy), v in entries.items() if v != 0),
            default=1,
        )
        radius = max(radius, 1)
        side = 2 * radius + 1
        rows = [[0] * side for _ in range(side)]
        for (dx, dy), v in entries.items():
            if abs(dx) <= radius and abs(dy) <= radius:
                rows[dy + radius][dx + radius] = v
        coarse.append(
            StencilKernel(numerators=_to_rows(rows), denominator=denom, h_power=kern.h_power)
        )
    return coarse[0], coarse[1]


@lru_cache(maxsize=None)
def level_kernels(level: int):
    """Kernel pair ``(laplace, mass)`` for a grid level (1 = finest).

    Level 1 returns the 5-point pair, deeper levels the cached Galerkin
    chain.  The mass kernel of level ``l`` sums to ``4**(l-1)`` times its
    denominator; operator assembly divides that factor back out so every
    level discretizes the same equation.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    if level == 1:
        return LAPLACE_LEVEL1, MASS_LEVEL1
    return galerkin_coarsen(*level_kernels(level - 1))


def mass_level_scale(level: int) -> float:
    """Value normalization 4**(level-1) carried by the kernel chain."""
    return float(4 ** (level - 1))


# ---------------------------------------------------------------------------
# Frozen reference tables for verify_chain.
#
# The level-3 through level-6 coefficients below are the published values the
# chain must reproduce.  All entries are exact integers except 21 entries of
# the level-6 mass kernel whose magnitude exceeds 2**53; those carry float64
# rounding in the source tables (symmetric positions there disagree by a few
# ulp), so verify_chain compares them with a 3-ulp tolerance instead of
# integer equality.
# ---------------------------------------------------------------------------

_L3_LAPLACE = (
    (-3, -534, -5773, -11956, -5773, -534, -3),
    (-534, -32844, -207370, -354088, -207370, -32844, -534),
    (-5773, -207370, -294371, 384244, -294371, -207370, -5773),
    (-11956, -354088, 384244, 2945488, 384244, -354088, -11956),
    (-5773, -207370, -294371, 384244, -294371, -207370, -5773),
    (-534, -32844, -207370, -354088, -207370, -32844, -534),
    (-3, -534, -5773, -11956, -5773, -534, -3),
)
_L3_MASS = (
    (1, 322, 3823, 8092, 3823, 322, 1),
    (322, 103684, 1231006, 2605624, 1231006, 103684, 322),
    (3823, 1231006, 14615329, 30935716, 14615329, 1231006, 3823),
    (8092, 2605624, 30935716, 65480464, 30935716, 2605624, 8092),
    (3823, 1231006, 14615329, 30935716, 14615329, 1231006, 3823),
    (322, 103684, 1231006, 2605624, 1231006, 103684, 322),
    (1, 322, 3823, 8092, 3823, 322, 1),
)
_L4_LAPLACE = (
    (-10395, -887166, -7871637, -15491748, -7871637, -887166, -10395),
    (-887166, -39105612, -215169378, -348459432, -215169378, -39105612, -887166),
    (-7871637, -215169378, -265120059, 413761124, -265120059, -215169378, -7871637),
    (-15491748, -348459432, 413761124, 2809129936, 413761124, -348459432, -15491748),
    (-7871637, -215169378, -265120059, 413761124, -265120059, -215169378, -7871637),
    (-887166, -39105612, -215169378, -348459432, -215169378, -39105612, -887166),
    (-10395, -887166, -7871637, -15491748, -7871637, -887166, -10395),
)
_L4_MASS = (
    (27225, 3939210, 40768695, 83544780, 40768695, 3939210, 27225),
    (3939210, 569967876, 5898859542, 12088170168, 5898859542, 569967876, 3939210),
    (40768695, 5898859542, 61050008889, 125106029556, 61050008889, 5898859542, 40768695),
    (83544780, 12088170168, 125106029556, 256372094224, 125106029556, 12088170168, 83544780),
    (40768695, 5898859542, 61050008889, 125106029556, 61050008889, 5898859542, 40768695),
    (3939210, 569967876, 5898859542, 12088170168, 5898859542, 569967876, 3939210),
    (27225, 3939210, 40768695, 83544780, 40768695, 3939210, 27225),
)
_L5_LAPLACE = (
    (-13491387, -1011388446, -8590720245, -16705596516, -8590720245, -1011388446, -13491387),
    (-1011388446, -41427399756, -220811304386, -353095695272, -220811304386, -41427399756, -1011388446),
    (-8590720245, -220811304386, -262703195227, 427978620452, -262703195227, -220811304386, -8590720245),
    (-16705596516, -353095695272, 427978620452, 2827174335440, 427978620452, -353095695272, -16705596516),
    (-8590720245, -220811304386, -262703195227, 427978620452, -262703195227, -220811304386, -8590720245),
    (-1011388446, -41427399756, -220811304386, -353095695272, -220811304386, -41427399756, -1011388446),
    (-13491387, -1011388446, -8590720245, -16705596516, -8590720245, -1011388446, -13491387),
)
_L5_MASS = (
    (158684409, 19907719338, 199630340247, 405976871820, 199630340247, 19907719338, 158684409),
    (19907719338, 2497518765316, 25044582577654, 50931743533240, 25044582577654, 2497518765316, 19907719338),
    (199630340247, 25044582577654, 251141703197401, 510732601675060, 251141703197401, 25044582577654, 199630340247),
    (405976871820, 50931743533240, 510732601675060, 1038647851363600, 510732601675060, 50931743533240, 405976871820),
    (199630340247, 25044582577654, 251141703197401, 510732601675060, 251141703197401, 25044582577654, 199630340247),
    (19907719338, 2497518765316, 25044582577654, 50931743533240, 25044582577654, 2497518765316, 19907719338),
    (158684409, 19907719338, 199630340247, 405976871820, 199630340247, 19907719338, 158684409),
)
_L6_LAPLACE = (
    (-14618265915, -1063059274398, -8934400311925, -17322732417892, -8934400311925, -1063059274398, -14618265915),
    (-1063059274398, -42774103061580, -226217899925314, -360608941958056, -226217899925314, -42774103061580, -1063059274398),
    (-8934400311925, -226217899925314, -266795319274715, 439293870677284, -266795319274715, -226217899925314, -8934400311925),
    (-17322732417892, -360608941958056, 439293870677284, 2882610253296592, 439293870677284, -360608941958056, -17322732417892),
    (-8934400311925, -226217899925314, -266795319274715, 439293870677284, -266795319274715, -226217899925314, -8934400311925),
    (-1063059274398, -42774103061580, -226217899925314, -360608941958056, -226217899925314, -42774103061580, -1063059274398),
    (-14618265915, -1063059274398, -8934400311925, -17322732417892, -8934400311925, -1063059274398, -14618265915),
)
_L6_MASS = (
    (706549519225, 85722084590890, 852977249303575, 1731387418334860, 852977249303575, 85722084590890, 706549519225),
    (85722084590890, 10400227566028036, 103487421517331808, 210060490730926272, 103487421517331824, 10400227566028036, 85722084590890),
    (852977249303575, 103487421517331840, 1029751161146567936, 2090206046973178368, 1029751161146568192, 103487421517331792, 852977249303575),
    (1731387418334860, 210060490730926208, 2090206046973178624, 4242735025361522688, 2090206046973178624, 210060490730926208, 1731387418334860),
    (852977249303575, 103487421517331840, 1029751161146568064, 2090206046973178624, 1029751161146567936, 103487421517331792, 852977249303575),
    (85722084590890, 10400227566028036, 103487421517331808, 210060490730926208, 103487421517331808, 10400227566028036, 85722084590890),
    (706549519225, 85722084590890, 852977249303575, 1731387418334860, 852977249303575, 85722084590890, 706549519225),
)

_K = 1024
_M = 4096

REFERENCE_KERNELS = {
    3: {
        "laplace": (_L3_LAPLACE, _M * _K),
        "mass": (_L3_MASS, _M * _M),
    },
    4: {
        "laplace": (_L4_LAPLACE, _M * _K * _K),
        "mass": (_L4_MASS, _M * _M * _K),
    },
    5: {
        "laplace": (_L5_LAPLACE, _M * _K**3),
        "mass": (_L5_MASS, _M * _M * _K**2),
    },
    6: {
        "laplace": (_L6_LAPLACE, _M * _K**4),
        "mass": (_L6_MASS, _M * _M * _K**3),
    },
}

# float64 integers are exact up to 2**53; reference entries above that carry
# rounding noise of at most a few ulp.
_EXACT_LIMIT = 2**53
_ULP_TOLERANCE = 3


def _ulp(value: int) -> int:
    f = float(abs(value))
    return max(1, int(math.ulp(f)))


def verify_chain(kernels=None):
    """Compare the derived kernel chain with the reference tables.

    Parameters
    ----------
    kernels : callable, optional
        Alternative ``level -> (laplace, mass)`` provider; defaults to
        :func:`level_kernels`.  Used by tests to inject perturbed chains.

    Returns
    -------
    list of dict
        One record per (level, kind) with keys ``level``, ``kind``,
        ``exact_match``, ``within_ulp`` and ``first_mismatch`` (a tuple
        ``(row, col, derived, reference)`` or None).
    """
    provider = kernels if kernels is not None else level_kernels
    results = []
    for level, ref in REFERENCE_KERNELS.items():
        lap, mass = provider(level)
        for kind, kern in (("laplace", lap), ("mass", mass)):
            ref_rows, ref_denom = ref[kind]
            exact = kern.denominator == ref_denom
            within = exact
            first = None
            for r in range(7):
                for c in range(7):
                    got = kern.numerators[r][c]
                    want = ref_rows[r][c]
                    if got == want:
                        continue
                    exact = False
                    if abs(want) > _EXACT_LIMIT and abs(got - want) <= _ULP_TOLERANCE * _ulp(got):
                        continue
                    within = False
                    if first is None:
                        first = (r, c, got, want)
            if kern.denominator != ref_denom:
                within = False
                if first is None:
                    first = (-1, -1, kern.denominator, ref_denom)
            results.append(
                {
                    "level": level,
                    "kind": kind,
                    "exact_match": exact,
                    "within_ulp": within,
                    "first_mismatch": first,
                }
            )
    return results
