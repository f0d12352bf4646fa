"""Matrix-free Helmholtz and shifted-Laplace operators with ghost closure.

A :class:`LevelOperator` applies ``-Laplace - shift * I(k^2)`` on one grid
level through exact-rational stencil kernels converted to floating point once
at construction.  The boundary treatment synthesizes a single ghost layer
from the field (mirror rule for Dirichlet, radiation rule for Sommerfeld) and
zero-pads everything beyond it; ghost-point wavenumbers are extrapolated for
Dirichlet sides and zero otherwise.

``assemble_csr`` builds the same operator explicitly, entry by entry, as an
independent oracle and as the comparison path for the matvec benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import CapacityError, ShapeError
from .grid import DIRICHLET, ComplexField, GridHierarchy
from .stencils import StencilKernel, level_kernels, mass_level_scale

__all__ = [
    "LevelOperator",
    "helmholtz_operator",
    "cslp_operator",
    "radius1_operator",
    "ghost_pad",
    "ksq_ghost_pad",
    "apply_helmholtz",
    "apply_cslp",
    "assemble_csr",
    "assemble_dense",
    "matvec_flop_byte_counters",
    "arithmetic_intensity",
]

DEFAULT_ASSEMBLY_LIMIT = 1_100_000  # points


def ghost_pad(u: np.ndarray, radius: int, h: float, boundary, k_edges) -> np.ndarray:
    """Embed ``u`` in a zero band of width ``radius`` and fill the first ghost layer.

    ``boundary`` is the per-side kind (west, east, south, north) and
    ``k_edges`` the matching wavenumber values along each side (used by the
    Sommerfeld rule).  Ghost corners and layers beyond the first stay zero.
    """
    ny, nx = u.shape
    r = radius
    pad = np.zeros((ny + 2 * r, nx + 2 * r), dtype=np.complex128)
    pad[r : r + ny, r : r + nx] = u
    west, east, south, north = boundary
    kw, ke, ks, kn = k_edges
    two_ih = 2.0j * h

    if west == DIRICHLET:
        pad[r : r + ny, r - 1] = 2.0 * u[:, 0] - u[:, 1]
    else:
        pad[r : r + ny, r - 1] = u[:, 1] + two_ih * kw * u[:, 0]
    if east == DIRICHLET:
        pad[r : r + ny, r + nx] = 2.0 * u[:, -1] - u[:, -2]
    else:
        pad[r : r + ny, r + nx] = u[:, -2] + two_ih * ke * u[:, -1]
    if south == DIRICHLET:
        pad[r - 1, r : r + nx] = 2.0 * u[0, :] - u[1, :]
    else:
        pad[r - 1, r : r + nx] = u[1, :] + two_ih * ks * u[0, :]
    if north == DIRICHLET:
        pad[r + ny, r : r + nx] = 2.0 * u[-1, :] - u[-2, :]
    else:
        pad[r + ny, r : r + nx] = u[-2, :] + two_ih * kn * u[-1, :]
    return pad


def ksq_ghost_pad(ksq: np.ndarray, radius: int, boundary) -> np.ndarray:
    """Ghost-padded k^2 field: extrapolated on Dirichlet sides, zero elsewhere."""
    ny, nx = ksq.shape
    r = radius
    pad = np.zeros((ny + 2 * r, nx + 2 * r), dtype=np.float64)
    pad[r : r + ny, r : r + nx] = ksq
    west, east, south, north = boundary
    if west == DIRICHLET:
        pad[r : r + ny, r - 1] = 2.0 * ksq[:, 0] - ksq[:, 1]
    if east == DIRICHLET:
        pad[r : r + ny, r + nx] = 2.0 * ksq[:, -1] - ksq[:, -2]
    if south == DIRICHLET:
        pad[r - 1, r : r + nx] = 2.0 * ksq[0, :] - ksq[1, :]
    if north == DIRICHLET:
        pad[r + ny, r : r + nx] = 2.0 * ksq[-1, :] - ksq[-2, :]
    return pad


class LevelOperator:
    """Matrix-free ``-Laplace - shift * I(k^2)`` on one grid level."""

    def __init__(self, level, nx, ny, h, ksq, boundary, laplace: StencilKernel,
                 mass: StencilKernel, shift=1.0, level_scale=1.0):
        if laplace.radius != mass.radius:
            raise ShapeError("laplace and mass kernels must share a radius")
        self.level = level
        self.nx, self.ny, self.h = nx, ny, float(h)
        self.ksq = np.ascontiguousarray(ksq, dtype=np.float64)
        self.boundary = tuple(boundary)
        self.shift = complex(shift)
        self.radius = laplace.radius
        self.laplace = laplace
        self.mass = mass
        # floating conversion happens exactly once, here
        self.lap_coef = laplace.as_float() / self.h**2
        self.mass_coef = (-self.shift / level_scale) * mass.as_float().astype(np.complex128)
        k_field = np.sqrt(self.ksq)
        self.k_edges = (k_field[:, 0], k_field[:, -1], k_field[0, :], k_field[-1, :])
        self.ksq_pad = ksq_ghost_pad(self.ksq, self.radius, self.boundary)
        self._diag = None

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def npoints(self):
        return self.nx * self.ny

    def pad(self, u: np.ndarray) -> np.ndarray:
        return ghost_pad(u, self.radius, self.h, self.boundary, self.k_edges)

    def apply(self, u: np.ndarray, out=None, pool=None, tiles=None) -> np.ndarray:
        """Apply the operator to a 2D field, optionally tile-parallel."""
        if u.shape != self.shape:
            raise ShapeError(f"field shape {u.shape} does not match level grid {self.shape}")
        if u.dtype != np.complex128:
            u = u.astype(np.complex128)
        upad = self.pad(u)
        if out is None:
            out = np.empty_like(u)
        if tiles is None or pool is None or len(tiles) <= 1:
            self._contract(upad, out, 0, self.ny, 0, self.nx)
        else:
            pool.run(
                lambda t: self._contract(upad, out, t.j0, t.j1, t.i0, t.i1),
                tiles,
            )
        self._pin_dirichlet(u, out)
        return out

    def dirichlet_slices(self):
        """Index slices of boundary points pinned by identity rows."""
        west, east, south, north = self.boundary
        out = []
        if west == DIRICHLET:
            out.append((slice(None), 0))
        if east == DIRICHLET:
            out.append((slice(None), -1))
        if south == DIRICHLET:
            out.append((0, slice(None)))
        if north == DIRICHLET:
            out.append((-1, slice(None)))
        return out

    def _pin_dirichlet(self, u, out):
        # Dirichlet boundary values are data, not unknowns: identity rows
        for sl in self.dirichlet_slices():
            out[sl] = u[sl]

    def _contract(self, upad, out, j0, j1, i0, i1):
        r = self.radius
        uw = upad[j0 : j1 + 2 * r, i0 : i1 + 2 * r]
        ow = out[j0:j1, i0:i1]
        if r == 1:
            _kernels.contract_radius1(
                uw, self.ksq[j0:j1, i0:i1], ow, self.lap_coef[1, 1] / 4.0, self.mass_coef[1, 1]
            )
        else:
            kw = self.ksq_pad[j0 : j1 + 2 * r, i0 : i1 + 2 * r]
            _kernels.contract_general(uw, kw, ow, self.lap_coef, self.mass_coef)

    def diagonal(self) -> np.ndarray:
        """Matrix diagonal including ghost-closure contributions (radius 1 only)."""
        if self.radius != 1:
            raise ShapeError("diagonal is only provided for radius-1 operators")
        if self._diag is not None:
            return self._diag
        lap_scale = self.lap_coef[1, 1] / 4.0
        d = np.full(self.shape, 4.0 * lap_scale, dtype=np.complex128)
        d += self.mass_coef[1, 1] * self.ksq
        west, east, south, north = self.boundary
        kw, ke, ks, kn = self.k_edges
        for side, sl, kedge in (
            (west, (slice(None), 0), kw),
            (east, (slice(None), -1), ke),
            (south, (0, slice(None)), ks),
            (north, (-1, slice(None)), kn),
        ):
            if side != DIRICHLET:
                d[sl] += -lap_scale * 2.0j * self.h * kedge
        for side, sl in (
            (west, (slice(None), 0)),
            (east, (slice(None), -1)),
            (south, (0, slice(None))),
            (north, (-1, slice(None))),
        ):
            if side == DIRICHLET:
                d[sl] = 1.0
        self._diag = d
        return d


def _radius1_kernels():
    return level_kernels(1)


def helmholtz_operator(hierarchy: GridHierarchy, level: int) -> LevelOperator:
    """Helmholtz operator of the hierarchy level, using the kernel chain."""
    lv = hierarchy.level(level)
    lap, mass = level_kernels(level)
    return LevelOperator(
        level, lv.nx, lv.ny, lv.h, hierarchy.ksq_at(level), hierarchy.boundary,
        lap, mass, shift=1.0, level_scale=mass_level_scale(level),
    )


def cslp_operator(hierarchy: GridHierarchy, level: int, beta2: float, beta1: float = 1.0) -> LevelOperator:
    """Complex-shifted Laplace preconditioner operator of a hierarchy level."""
    lv = hierarchy.level(level)
    lap, mass = level_kernels(level)
    return LevelOperator(
        level, lv.nx, lv.ny, lv.h, hierarchy.ksq_at(level), hierarchy.boundary,
        lap, mass, shift=complex(beta1, beta2), level_scale=mass_level_scale(level),
    )


def radius1_operator(nx, ny, h, ksq, boundary, shift) -> LevelOperator:
    """Plain 5-point operator on arbitrary grid data (multigrid sublevels)."""
    lap, mass = _radius1_kernels()
    return LevelOperator(0, nx, ny, h, ksq, boundary, lap, mass, shift=shift, level_scale=1.0)


def apply_helmholtz(op: LevelOperator, hierarchy: GridHierarchy, u: ComplexField) -> ComplexField:
    """Level-checked Helmholtz application on a ComplexField."""
    if u.level != op.level:
        raise ShapeError(f"field level {u.level} does not match operator level {op.level}")
    out = op.apply(u.grid_view(hierarchy))
    return ComplexField(level=u.level, data=out.ravel())


def apply_cslp(op: LevelOperator, hierarchy: GridHierarchy, u: ComplexField) -> ComplexField:
    """Level-checked shifted-operator application on a ComplexField."""
    return apply_helmholtz(op, hierarchy, u)


def _ghost_distribution(side_kind, h, k_boundary):
    """Weights (boundary_point, inner_point) replacing one ghost value."""
    if side_kind == DIRICHLET:
        return 2.0 + 0.0j, -1.0 + 0.0j
    return 2.0j * h * k_boundary, 1.0 + 0.0j


def assemble_csr(op: LevelOperator, max_points: int = DEFAULT_ASSEMBLY_LIMIT) -> sp.csr_matrix:
    """Explicitly assembled matrix equal to the matrix-free action.

    Scalar, entry-by-entry construction that re-derives the ghost closure
    algebraically; deliberately shares no code with :meth:`LevelOperator.apply`
    so the two paths can certify each other.
    """
    if op.npoints > max_points:
        raise CapacityError(f"{op.npoints} points exceed the assembly guard {max_points}")
    nx, ny, r = op.nx, op.ny, op.radius
    lap = op.lap_coef
    mass = op.mass_coef
    ksq_pad = op.ksq_pad
    west, east, south, north = op.boundary
    kw, ke, ks, kn = op.k_edges

    rows, cols, vals = [], [], []

    def add(row, i, j, w):
        rows.append(row)
        cols.append(j * nx + i)
        vals.append(w)

    def pinned(i, j):
        return (
            (west == DIRICHLET and i == 0)
            or (east == DIRICHLET and i == nx - 1)
            or (south == DIRICHLET and j == 0)
            or (north == DIRICHLET and j == ny - 1)
        )

    for j in range(ny):
        for i in range(nx):
            row = j * nx + i
            if pinned(i, j):
                add(row, i, j, 1.0 + 0.0j)
                continue
            for oj in range(-r, r + 1):
                for oi in range(-r, r + 1):
                    ii, jj = i + oi, j + oj
                    coef = lap[oj + r, oi + r] + mass[oj + r, oi + r] * ksq_pad[jj + r, ii + r]
                    if coef == 0:
                        continue
                    x_in = 0 <= ii < nx
                    y_in = 0 <= jj < ny
                    if x_in and y_in:
                        add(row, ii, jj, coef)
                    elif y_in and ii == -1:
                        wb, wi = _ghost_distribution(west, op.h, kw[jj])
                        add(row, 0, jj, coef * wb)
                        add(row, 1, jj, coef * wi)
                    elif y_in and ii == nx:
                        wb, wi = _ghost_distribution(east, op.h, ke[jj])
                        add(row, nx - 1, jj, coef * wb)
                        add(row, nx - 2, jj, coef * wi)
                    elif x_in and jj == -1:
                        wb, wi = _ghost_distribution(south, op.h, ks[ii])
                        add(row, ii, 0, coef * wb)
                        add(row, ii, 1, coef * wi)
                    elif x_in and jj == ny:
                        wb, wi = _ghost_distribution(north, op.h, kn[ii])
                        add(row, ii, ny - 1, coef * wb)
                        add(row, ii, ny - 2, coef * wi)
                    # anything further out is zero padding
    mat = sp.coo_matrix(
        (np.array(vals, dtype=np.complex128), (rows, cols)), shape=(op.npoints, op.npoints)
    )
    return mat.tocsr()


def assemble_dense(op: LevelOperator, max_points: int = 40_000) -> np.ndarray:
    """Dense variant of :func:`assemble_csr` for direct-solve oracles."""
    return assemble_csr(op, max_points=max_points).toarray()


_MF_FLOPS_PER_POINT = 11
_MF_BYTES_PER_POINT = 56
_CSR_FLOPS_PER_POINT = 10
_CSR_BYTES_PER_POINT = 120


def matvec_flop_byte_counters(kind: str, n_points: int):
    """Roofline counters of one 5-point matvec: (flops, bytes).

    ``matrix_free`` counts 11 flops and 56 bytes per grid point, ``csr``
    counts 10 flops and 120 bytes per row (5 nonzeros each).
    """
    if kind == "matrix_free":
        return _MF_FLOPS_PER_POINT * n_points, _MF_BYTES_PER_POINT * n_points
    if kind == "csr":
        return _CSR_FLOPS_PER_POINT * n_points, _CSR_BYTES_PER_POINT * n_points
    raise ValueError(f"unknown matvec kind {kind!r}")


def arithmetic_intensity(kind: str) -> float:
    flops, nbytes = matvec_flop_byte_counters(kind, 1)
    return flops / nbytes
