"""Higher-order intergrid transfers (restriction and prolongation).

Both directions use the same symmetric 1D numerators ``(1, 4, 6, 4, 1)``
applied as a tensor product with stride 2 and zero extension outside the
physical grid.  Restriction divides by 16 per dimension (partition of unity
on interior constants), prolongation by 8 (each parity class of fine points
receives unit weight), so the dense operators satisfy
``Z = TRANSFER_ADJOINT_SCALE * R^T`` in 2D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelError, ShapeError
from .stencils import (
    PROLONG_DENOMINATOR_1D,
    PROLONG_NUMERATORS_1D,
    RESTRICT_DENOMINATOR_1D,
)

__all__ = [
    "TransferStencil",
    "RESTRICTION",
    "PROLONGATION",
    "restrict_array",
    "prolong_array",
    "restrict",
    "prolong",
    "restriction_matrix",
    "prolongation_matrix",
]


@dataclass(frozen=True)
class TransferStencil:
    """Symmetric odd-length 1D transfer weights with exact denominator."""

    numerators: tuple
    denominator: int
    mode: str  # "restriction" | "prolongation"

    def weights(self) -> np.ndarray:
        return np.array(self.numerators, dtype=np.float64) / self.denominator


RESTRICTION = TransferStencil(PROLONG_NUMERATORS_1D, RESTRICT_DENOMINATOR_1D, "restriction")
PROLONGATION = TransferStencil(PROLONG_NUMERATORS_1D, PROLONG_DENOMINATOR_1D, "prolongation")


def coarse_size(n: int) -> int:
    if (n - 1) % 2:
        raise LevelError(f"cannot coarsen {n} points: n-1 must be even")
    return (n - 1) // 2 + 1


def restrict_array(fine: np.ndarray) -> np.ndarray:
    """Restrict a 2D field to the next coarser level (zero extension)."""
    ny, nx = fine.shape
    ncx, ncy = coarse_size(nx), coarse_size(ny)
    w = RESTRICTION.weights()
    pad = np.zeros((ny + 4, nx + 4), dtype=fine.dtype)
    pad[2:-2, 2:-2] = fine
    out = np.zeros((ncy, ncx), dtype=fine.dtype)
    for b in range(-2, 3):
        for a in range(-2, 3):
            out += (w[b + 2] * w[a + 2]) * pad[
                2 + b : 2 + b + 2 * ncy - 1 : 2, 2 + a : 2 + a + 2 * ncx - 1 : 2
            ]
    return out


def prolong_array(coarse: np.ndarray, fine_shape: tuple) -> np.ndarray:
    """Interpolate a 2D field to the next finer level (scatter form)."""
    nfy, nfx = fine_shape
    ncy, ncx = coarse.shape
    if nfx != 2 * ncx - 1 or nfy != 2 * ncy - 1:
        raise ShapeError(f"fine shape {fine_shape} does not refine {coarse.shape}")
    w = PROLONGATION.weights()
    pad = np.zeros((nfy + 4, nfx + 4), dtype=coarse.dtype)
    for b in range(-2, 3):
        for a in range(-2, 3):
            pad[2 + b : 2 + b + 2 * ncy - 1 : 2, 2 + a : 2 + a + 2 * ncx - 1 : 2] += (
                w[b + 2] * w[a + 2]
            ) * coarse
    return pad[2:-2, 2:-2]


def restrict(field, hierarchy):
    """Restrict a ComplexField to level ``field.level + 1``."""
    from .grid import ComplexField

    lvl = field.level
    if lvl + 1 > hierarchy.ml:
        raise LevelError(f"hierarchy has no level {lvl + 1}")
    data = restrict_array(field.grid_view(hierarchy))
    return ComplexField(level=lvl + 1, data=data.ravel())


def prolong(field, hierarchy):
    """Interpolate a ComplexField to level ``field.level - 1``."""
    from .grid import ComplexField

    lvl = field.level
    if lvl - 1 < 1:
        raise LevelError("already at the finest level")
    fine = hierarchy.levels[lvl - 2]
    data = prolong_array(field.grid_view(hierarchy), (fine.ny, fine.nx))
    return ComplexField(level=lvl - 1, data=data.ravel())


def _matrix_1d(nf: int, nc: int, denominator: int) -> np.ndarray:
    w = np.array(PROLONG_NUMERATORS_1D, dtype=np.float64) / denominator
    m = np.zeros((nc, nf))
    for c in range(nc):
        for o in range(-2, 3):
            x = 2 * c + o
            if 0 <= x < nf:
                m[c, x] = w[o + 2]
    return m


def restriction_matrix(fine_shape: tuple, coarse_shape: tuple) -> np.ndarray:
    """Dense restriction matrix on row-major (x fastest) flattened fields."""
    nfy, nfx = fine_shape
    ncy, ncx = coarse_shape
    ry = _matrix_1d(nfy, ncy, RESTRICT_DENOMINATOR_1D)
    rx = _matrix_1d(nfx, ncx, RESTRICT_DENOMINATOR_1D)
    return np.kron(ry, rx)


def prolongation_matrix(fine_shape: tuple, coarse_shape: tuple) -> np.ndarray:
    """Dense prolongation matrix; equals 4 times the restriction transpose."""
    nfy, nfx = fine_shape
    ncy, ncx = coarse_shape
    py = _matrix_1d(nfy, ncy, PROLONG_DENOMINATOR_1D)
    px = _matrix_1d(nfx, ncx, PROLONG_DENOMINATOR_1D)
    return np.kron(py, px).T
