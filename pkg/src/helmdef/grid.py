"""Vertex-centered grid hierarchy, wavenumber fields and benchmark problems.

The hierarchy stores one squared-wavenumber field per level; coarse levels
are populated by direct injection at coincident points, which keeps the
matrix-free coarse operators consistent with the fine discretization for
heterogeneous media.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HierarchyError, LevelError, ModelError, ShapeError

__all__ = [
    "GridLevel",
    "GridHierarchy",
    "ComplexField",
    "VelocityModel",
    "Problem",
    "build_hierarchy",
    "kh_of",
    "dimensionless_kmax",
    "point_source_rhs",
    "wedge_velocity",
    "synthetic_marmousi_velocity",
    "mp1_problem",
    "wedge_problem",
    "marmousi_problem",
]

SOMMERFELD = "sommerfeld"
DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class GridLevel:
    """One level of the vertex-centered hierarchy (level 1 is finest)."""

    level: int
    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple

    @property
    def h(self) -> float:
        return self.hx

    @property
    def npoints(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nx)

    def coords(self):
        """1D coordinate arrays (x, y) of the grid points."""
        x0, y0 = self.origin
        return (
            x0 + self.hx * np.arange(self.nx),
            y0 + self.hy * np.arange(self.ny),
        )


@dataclass
class GridHierarchy:
    """Grid levels from finest to coarsest plus per-level k^2 fields."""

    levels: list
    ksq: list  # per level, shape (ny, nx), float64
    boundary: tuple  # per side (west, east, south, north)

    @property
    def ml(self) -> int:
        return len(self.levels)

    def level(self, l: int) -> GridLevel:
        if not 1 <= l <= self.ml:
            raise LevelError(f"level {l} outside 1..{self.ml}")
        return self.levels[l - 1]

    def ksq_at(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.ml:
            raise LevelError(f"level {l} outside 1..{self.ml}")
        return self.ksq[l - 1]

    @property
    def extent(self) -> tuple:
        lv = self.levels[0]
        return (lv.hx * (lv.nx - 1), lv.hy * (lv.ny - 1))


@dataclass
class ComplexField:
    """Level-tagged complex values, one per grid point, row-major (x fastest)."""

    level: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128).ravel()

    def grid_view(self, hierarchy) -> np.ndarray:
        lv = hierarchy.level(self.level)
        if self.data.size != lv.npoints:
            raise ShapeError(
                f"field has {self.data.size} values, level {self.level} has {lv.npoints}"
            )
        return self.data.reshape(lv.ny, lv.nx)

    def copy(self) -> "ComplexField":
        return ComplexField(self.level, self.data.copy())


@dataclass
class VelocityModel:
    """Propagation-speed model.

    kind is one of ``constant`` (fields ``c`` or ``k``), ``wedge``
    (``layers``: list of ``(y_at_x0, y_at_x1, velocity)`` read top to
    bottom) or ``gridfile`` (raster attributes ``values``, ``dx``, ``dy``,
    ``x0``, ``y0``).
    """

    kind: str
    c: float | None = None
    k: float | None = None
    layers: list = field(default_factory=list)
    values: np.ndarray | None = None
    dx: float = 0.0
    dy: float = 0.0
    x0: float = 0.0
    y0: float = 0.0

    def min_velocity(self) -> float:
        if self.kind == "constant":
            if self.k is not None:
                raise ModelError("constant model defined by wavenumber has no velocity")
            return float(self.c)
        if self.kind == "wedge":
            return min(v for _, _, v in self.layers)
        if self.kind == "gridfile":
            return float(self.values.min())
        raise ModelError(f"unknown velocity model kind {self.kind!r}")

    def velocity_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Velocity sampled on the meshgrid of coordinate vectors x, y."""
        if self.kind == "constant":
            return np.full((y.size, x.size), float(self.c))
        if self.kind == "wedge":
            return _wedge_field(self.layers, x, y)
        if self.kind == "gridfile":
            return _bilinear(self, x, y)
        raise ModelError(f"unknown velocity model kind {self.kind!r}")

    def validate(self):
        if self.kind == "constant":
            if (self.c is None) == (self.k is None):
                raise ModelError("constant model needs exactly one of c or k")
            if self.c is not None and self.c <= 0:
                raise ModelError("velocity must be positive")
            if self.k is not None and self.k <= 0:
                raise ModelError("wavenumber must be positive")
        elif self.kind == "wedge":
            if not self.layers:
                raise ModelError("wedge model needs layers")
            if any(v <= 0 for _, _, v in self.layers):
                raise ModelError("velocity must be positive")
        elif self.kind == "gridfile":
            if self.values is None or self.values.size == 0:
                raise ModelError("gridfile model has no samples")
            if self.values.min() <= 0:
                raise ModelError("velocity must be positive")
        else:
            raise ModelError(f"unknown velocity model kind {self.kind!r}")


def _wedge_field(layers, x, y):
    """Top-down layer assignment; the last layer is the catch-all bottom."""
    xx, yy = np.meshgrid(x, y)
    lx = x[-1] - x[0] if x.size > 1 else 1.0
    out = np.full(xx.shape, layers[-1][2], dtype=np.float64)
    remaining = np.ones(xx.shape, dtype=bool)
    for ya, yb, v in layers[:-1]:
        interface = ya + (yb - ya) * (xx - x[0]) / lx
        take = remaining & (yy >= interface)
        out[take] = v
        remaining &= ~take
    return out


def _bilinear(model: VelocityModel, x, y):
    vals = model.values
    nyv, nxv = vals.shape
    fx = np.clip((x - model.x0) / model.dx, 0.0, nxv - 1.0)
    fy = np.clip((y - model.y0) / model.dy, 0.0, nyv - 1.0)
    ix = np.minimum(fx.astype(int), nxv - 2) if nxv > 1 else np.zeros_like(fx, dtype=int)
    iy = np.minimum(fy.astype(int), nyv - 2) if nyv > 1 else np.zeros_like(fy, dtype=int)
    tx = fx - ix
    ty = fy - iy
    ix2 = np.minimum(ix + 1, nxv - 1)
    iy2 = np.minimum(iy + 1, nyv - 1)
    IX, IY = np.meshgrid(ix, iy)
    IX2, IY2 = np.meshgrid(ix2, iy2)
    TX, TY = np.meshgrid(tx, ty)
    return (
        vals[IY, IX] * (1 - TX) * (1 - TY)
        + vals[IY, IX2] * TX * (1 - TY)
        + vals[IY2, IX] * (1 - TX) * TY
        + vals[IY2, IX2] * TX * TY
    )


def build_hierarchy(domain, h, ml, velocity=None, f=None, k=None, boundary=SOMMERFELD):
    """Build the grid hierarchy with per-level squared wavenumber fields.

    Parameters
    ----------
    domain : ((x0, x1), (y0, y1))
        Physical rectangle.
    h : float
        Finest mesh width; both extents must be integer multiples of it.
    ml : int
        Number of levels (>= 2); every coarsening halves the interval count,
        so ``nx - 1`` and ``ny - 1`` must be divisible by ``2**(ml-1)``.
    velocity : VelocityModel, optional
        Speed model; combined with frequency ``f`` into k(x,y) = 2*pi*f/c.
        A constant model given directly by ``k`` ignores ``f``.
    f, k : float, optional
        Frequency in Hz, or a direct constant wavenumber.
    boundary : str or 4-tuple
        Boundary kind, uniform or per side (west, east, south, north).
    """
    (x0, x1), (y0, y1) = domain
    lx, ly = x1 - x0, y1 - y0
    if lx <= 0 or ly <= 0 or h <= 0:
        raise HierarchyError("domain extents and mesh width must be positive")
    nx = _points(lx, h)
    ny = _points(ly, h)
    if ml < 2:
        raise HierarchyError("hierarchy needs at least two levels")
    step = 2 ** (ml - 1)
    if (nx - 1) % step or (ny - 1) % step:
        raise HierarchyError(
            f"grid {nx}x{ny} cannot be coarsened {ml - 1} times "
            f"(interval counts must be divisible by {step})"
        )

    if k is not None:
        if velocity is not None and velocity.kind != "constant":
            raise ModelError("direct wavenumber only valid with a constant model")
        velocity = VelocityModel(kind="constant", k=float(k))
    if velocity is None:
        raise ModelError("either a velocity model or a wavenumber is required")
    velocity.validate()
    if velocity.k is None and f is None:
        raise ModelError("frequency required when the model specifies velocities")

    boundary = (boundary,) * 4 if isinstance(boundary, str) else tuple(boundary)
    if len(boundary) != 4 or any(b not in (SOMMERFELD, DIRICHLET) for b in boundary):
        raise HierarchyError(f"invalid boundary specification {boundary!r}")

    levels = []
    ksq = []
    n_x, n_y, hh = nx, ny, float(h)
    for l in range(1, ml + 1):
        levels.append(GridLevel(level=l, nx=n_x, ny=n_y, hx=hh, hy=hh, origin=(x0, y0)))
        if l == 1:
            xs, ys = levels[0].coords()
            if velocity.k is not None:
                field_ksq = np.full((n_y, n_x), float(velocity.k) ** 2)
            else:
                c = velocity.velocity_at(xs, ys)
                field_ksq = (2.0 * math.pi * f / c) ** 2
            if not np.all(np.isfinite(field_ksq)) or field_ksq.min() < 0:
                raise ModelError("k^2 field must be finite and nonnegative")
        else:
            field_ksq = ksq[-1][::2, ::2].copy()  # injection at coincident points
        ksq.append(np.ascontiguousarray(field_ksq))
        n_x, n_y, hh = (n_x - 1) // 2 + 1, (n_y - 1) // 2 + 1, 2.0 * hh
    return GridHierarchy(levels=levels, ksq=ksq, boundary=boundary)


def _points(length, h):
    n = length / h
    if abs(n - round(n)) > 1e-8 * max(1.0, abs(n)):
        raise HierarchyError(f"extent {length} is not a multiple of mesh width {h}")
    return int(round(n)) + 1


def kh_of(level: int, hierarchy: GridHierarchy) -> float:
    """Largest k*h over the points of a level."""
    lv = hierarchy.level(level)
    return float(np.sqrt(hierarchy.ksq_at(level).max()) * lv.h)


def dimensionless_kmax(hierarchy: GridHierarchy) -> float:
    """Largest dimensionless wavenumber k * sqrt(Lx * Ly) over the domain."""
    lx, ly = hierarchy.extent
    return float(np.sqrt(hierarchy.ksq_at(1).max() * lx * ly))


def point_source_rhs(hierarchy: GridHierarchy, location) -> ComplexField:
    """Discrete Dirac delta: 1/h^2 at the grid point nearest to ``location``."""
    lv = hierarchy.level(1)
    x0, y0 = lv.origin
    x, y = location
    i = int(round((x - x0) / lv.hx))
    j = int(round((y - y0) / lv.hy))
    if not (0 <= i < lv.nx and 0 <= j < lv.ny):
        raise ModelError(f"source location {location} outside the domain")
    data = np.zeros((lv.ny, lv.nx), dtype=np.complex128)
    data[j, i] = 1.0 / (lv.hx * lv.hy)
    return ComplexField(level=1, data=data.ravel())


# ---------------------------------------------------------------------------
# Benchmark problems
# ---------------------------------------------------------------------------


@dataclass
class Problem:
    name: str
    hierarchy: GridHierarchy
    rhs: ComplexField


WEDGE_DOMAIN = ((0.0, 600.0), (-1000.0, 0.0))
# three layers, top to bottom; interface entries of the last layer are unused
WEDGE_LAYERS = [
    (-400.0, -500.0, 2000.0),
    (-800.0, -600.0, 1500.0),
    (0.0, 0.0, 3000.0),
]
MARMOUSI_DOMAIN = ((0.0, 9200.0), (-3000.0, 0.0))


def wedge_velocity() -> VelocityModel:
    """Three-layer wedge model with velocities 2000 / 1500 / 3000 m/s."""
    return VelocityModel(kind="wedge", layers=list(WEDGE_LAYERS))


def synthetic_marmousi_velocity(nxv: int = 1151, nyv: int = 376) -> VelocityModel:
    """Deterministic stand-in for the classic 158-layer seismic benchmark.

    Builds a strongly heterogeneous raster on the benchmark's domain: 158
    dipping layers whose velocities follow an increasing depth trend from
    1500 m/s to 5500 m/s with layer-to-layer oscillation.  Use a gridfile
    model to run the real velocity raster instead.
    """
    (x0, x1), (y0, y1) = MARMOUSI_DOMAIN
    dx = (x1 - x0) / (nxv - 1)
    dy = (y1 - y0) / (nyv - 1)
    x = x0 + dx * np.arange(nxv)
    y = y0 + dy * np.arange(nyv)
    xx, yy = np.meshgrid(x, y)
    depth = -yy  # 0 at the surface, positive downward
    lz = y1 - y0

    nlayers = 158
    # dipping, gently folded layer index
    dip = 0.12 * (xx - x0) + 180.0 * np.sin(2.0 * math.pi * (xx - x0) / (x1 - x0) * 1.5)
    idx = np.clip((depth + dip) / lz * nlayers, 0, nlayers - 1).astype(int)

    trend = 1500.0 + 4000.0 * (np.arange(nlayers) / (nlayers - 1)) ** 1.15
    wobble = 320.0 * np.sin(0.9 * np.arange(nlayers)) + 180.0 * np.sin(2.3 * np.arange(nlayers))
    layer_v = np.clip(trend + wobble, 1500.0, 5500.0)
    # thin shallow water-like band keeps the minimum velocity at the surface
    layer_v[:6] = 1500.0
    vals = layer_v[idx]
    return VelocityModel(kind="gridfile", values=vals, dx=dx, dy=dy, x0=x0, y0=y0)


def mp1_problem(k=None, f=None, kh=None, n=None, ml=3, boundary=SOMMERFELD) -> Problem:
    """Constant-wavenumber point-source problem on the unit square.

    Dirichlet boundaries give the MP-1a variant, Sommerfeld MP-1b.  The grid
    is fixed either by the resolution target ``kh`` or by the point count
    ``n`` per direction.
    """
    if k is None:
        if f is None:
            raise ModelError("mp1 needs a wavenumber or a frequency")
        k = 2.0 * math.pi * f  # unit propagation speed
    if (kh is None) == (n is None):
        raise ModelError("specify exactly one of kh or n")
    h = kh / k if kh is not None else 1.0 / (n - 1)
    hier = build_hierarchy(((0.0, 1.0), (0.0, 1.0)), h=h, ml=ml, k=k, boundary=boundary)
    rhs = point_source_rhs(hier, (0.5, 0.5))
    name = "mp1a" if set(hier.boundary) == {DIRICHLET} else "mp1b"
    return Problem(name=name, hierarchy=hier, rhs=rhs)


def wedge_problem(f: float, kh=None, nx=None, ml=4) -> Problem:
    """Wedge problem: three-layer medium, source at (300, 0)."""
    vel = wedge_velocity()
    (wx0, wx1), _ = WEDGE_DOMAIN
    if (kh is None) == (nx is None):
        raise ModelError("specify exactly one of kh or nx")
    if kh is not None:
        kmax = 2.0 * math.pi * f / vel.min_velocity()
        nx = int(round((wx1 - wx0) / (kh / kmax))) + 1
    h = (wx1 - wx0) / (nx - 1)
    hier = build_hierarchy(WEDGE_DOMAIN, h=h, ml=ml, velocity=vel, f=f)
    rhs = point_source_rhs(hier, (300.0, 0.0))
    return Problem(name="wedge", hierarchy=hier, rhs=rhs)


def marmousi_problem(f: float, nx: int = 737, ml=5, velocity: VelocityModel | None = None) -> Problem:
    """Marmousi-style problem; source at the top center of the domain."""
    vel = velocity if velocity is not None else synthetic_marmousi_velocity()
    (mx0, mx1), (my0, my1) = MARMOUSI_DOMAIN
    if velocity is not None and velocity.kind == "gridfile":
        mx0, my0 = velocity.x0, velocity.y0
        mx1 = velocity.x0 + velocity.dx * (velocity.values.shape[1] - 1)
        my1 = velocity.y0 + velocity.dy * (velocity.values.shape[0] - 1)
    h = (mx1 - mx0) / (nx - 1)
    hier = build_hierarchy(((mx0, mx1), (my0, my1)), h=h, ml=ml, velocity=vel, f=f)
    rhs = point_source_rhs(hier, ((mx0 + mx1) / 2.0, my1))
    return Problem(name="marmousi", hierarchy=hier, rhs=rhs)
