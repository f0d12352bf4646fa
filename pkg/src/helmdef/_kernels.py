"""Numba-jitted stencil contractions.

These loops are the number-crunching core of every operator application.
They read ghost-padded input snapshots and write disjoint output tiles, so
per-point arithmetic (and therefore the result bits) is independent of how
the grid is tiled across workers.
"""

import numba as nb

_jit = nb.njit(cache=True, nogil=True)


@_jit
def contract_radius1(upad, ksq, out, lap_scale, mass_coef):
    """5-point Laplace kernel plus pointwise mass term.

    out = lap_scale * (4*u - uW - uE - uS - uN) + mass_coef * ksq * u
    """
    ny, nx = out.shape
    for j in range(ny):
        for i in range(nx):
            uc = upad[j + 1, i + 1]
            lap = (
                4.0 * uc
                - upad[j + 1, i]
                - upad[j + 1, i + 2]
                - upad[j, i + 1]
                - upad[j + 2, i + 1]
            )
            out[j, i] = lap_scale * lap + mass_coef * ksq[j, i] * uc


@_jit
def contract_general(upad, kpad, out, lap_coef, mass_coef):
    """Dense square stencil with per-point wavenumber weighting.

    out[j,i] = sum_o (lap_coef[o] + mass_coef[o] * kpad[j+oj, i+oi]) * upad[j+oj, i+oi]
    """
    ny, nx = out.shape
    m = lap_coef.shape[0]
    for j in range(ny):
        for i in range(nx):
            acc = 0.0 + 0.0j
            for oj in range(m):
                for oi in range(m):
                    acc += (lap_coef[oj, oi] + mass_coef[oj, oi] * kpad[j + oj, i + oi]) * upad[
                        j + oj, i + oi
                    ]
            out[j, i] = acc


@_jit
def jacobi_radius1(upad, ksq, b, dinv, out, lap_scale, mass_coef, omega):
    """One damped Jacobi sweep for the radius-1 operator (out of place)."""
    ny, nx = out.shape
    for j in range(ny):
        for i in range(nx):
            uc = upad[j + 1, i + 1]
            lap = (
                4.0 * uc
                - upad[j + 1, i]
                - upad[j + 1, i + 2]
                - upad[j, i + 1]
                - upad[j + 2, i + 1]
            )
            mu = lap_scale * lap + mass_coef * ksq[j, i] * uc
            out[j, i] = uc + omega * dinv[j, i] * (b[j, i] - mu)
