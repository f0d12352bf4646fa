"""In-process domain partitioning, halo exchange and deterministic reductions.

Workers execute disjoint output tiles of each stencil phase; ghost bands are
read-only snapshots taken at a phase barrier.  Reductions always accumulate
fixed-size row blocks in ascending order, so every result is bit-identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import GridHierarchy

__all__ = [
    "Tile",
    "Partition",
    "WorkerPool",
    "partition_grid",
    "halo_exchange",
    "PaddedField",
    "reduce_dot",
    "reduce_norm",
]

HALO_RADII = {"radius1": 1, "level2": 2, "coarse": 3, "transfer": 2}
_REDUCTION_BLOCK_ROWS = 64


@dataclass(frozen=True)
class Tile:
    """Half-open index rectangle [j0, j1) x [i0, i1) owned by one worker."""

    j0: int
    j1: int
    i0: int
    i1: int

    @property
    def npoints(self) -> int:
        return (self.j1 - self.j0) * (self.i1 - self.i0)


@dataclass
class Partition:
    """Per-level tile decomposition; coarse tiles nest under fine tiles."""

    workers: int
    tiles: dict = field(default_factory=dict)  # level -> list[Tile]
    halo_radius: dict = field(default_factory=lambda: dict(HALO_RADII))

    def level_tiles(self, level: int):
        return self.tiles[level]


def _balanced_splits(n: int, parts: int, snap: int):
    """Interior split positions, snapped to multiples of ``snap``."""
    raw = [round(t * n / parts) for t in range(1, parts)]
    snapped = []
    for s in raw:
        s = int(round(s / snap)) * snap
        s = min(max(s, 0), n)
        if s > 0 and s < n and (not snapped or s > snapped[-1]):
            snapped.append(s)
    return snapped


def partition_grid(hierarchy: GridHierarchy, workers: int) -> Partition:
    """Near-square 2D tiling of every level for ``workers`` workers.

    Split positions are chosen on the finest level at multiples of
    ``2**(ml-1)`` so each coarse tile is exactly the injection of a fine
    tile.  Levels with fewer points than workers simply produce fewer
    (nonempty) tiles; the surplus workers idle there.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    finest = hierarchy.level(1)
    nx, ny = finest.nx, finest.ny
    best = None
    for a in range(1, workers + 1):
        if workers % a:
            continue
        b = workers // a
        cost = -(ny // -a) + -(nx // -b)  # ceil division
        if best is None or cost < best[0]:
            best = (cost, a, b)
    _, a, b = best
    snap = 2 ** (hierarchy.ml - 1)
    ysplit = _balanced_splits(ny, a, snap)
    xsplit = _balanced_splits(nx, b, snap)

    part = Partition(workers=workers)
    for l in range(1, hierarchy.ml + 1):
        lv = hierarchy.level(l)
        scale = 2 ** (l - 1)
        ys = [0] + [s // scale for s in ysplit] + [lv.ny]
        xs = [0] + [s // scale for s in xsplit] + [lv.nx]
        tiles = [
            Tile(j0, j1, i0, i1)
            for j0, j1 in zip(ys[:-1], ys[1:])
            for i0, i1 in zip(xs[:-1], xs[1:])
            if j1 > j0 and i1 > i0
        ]
        part.tiles[l] = tiles
    return part


class WorkerPool:
    """Thread pool executing tile tasks; inline when only one worker."""

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers))
        self._executor = (
            ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        )

    def run(self, fn, items):
        items = list(items)
        if self._executor is None or len(items) <= 1:
            for it in items:
                fn(it)
        else:
            # list() re-raises the first worker exception
            list(self._executor.map(fn, items))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class PaddedField:
    """Ghost-padded snapshot of a level field plus per-tile window views."""

    data: np.ndarray
    radius: int

    def tile_window(self, tile: Tile) -> np.ndarray:
        r = self.radius
        return self.data[tile.j0 : tile.j1 + 2 * r, tile.i0 : tile.i1 + 2 * r]

    def interior(self) -> np.ndarray:
        r = self.radius
        return self.data[r:-r, r:-r]


def halo_exchange(u: np.ndarray, pad_fn, radius: int) -> PaddedField:
    """Materialize the ghost bands every tile needs for one stencil phase.

    ``pad_fn`` supplies the physical-boundary closure (see
    :func:`helmdef.operators.ghost_pad`); interior tile ghosts are the
    neighbors' interior values by construction of the shared snapshot.
    """
    return PaddedField(data=pad_fn(u), radius=radius)


def reduce_dot(u: np.ndarray, v: np.ndarray, pool: WorkerPool | None = None) -> complex:
    """Deterministic global inner product conj(u) . v.

    Partial sums are taken over fixed 64-row blocks and combined in
    ascending block order, so the grouping (and the result, bit for bit)
    never depends on the number of workers computing the blocks.
    """
    if u.shape != v.shape:
        raise ValueError("reduce_dot needs identically shaped fields")
    u2 = u.reshape(1, -1) if u.ndim == 1 else u
    v2 = v.reshape(1, -1) if v.ndim == 1 else v
    ny = u2.shape[0]
    nblocks = -(ny // -_REDUCTION_BLOCK_ROWS)
    if nblocks == 1:
        return complex(np.vdot(u2, v2))
    partials = np.empty(nblocks, dtype=np.complex128)

    def block(t):
        j0 = t * _REDUCTION_BLOCK_ROWS
        j1 = min(j0 + _REDUCTION_BLOCK_ROWS, ny)
        partials[t] = np.vdot(u2[j0:j1], v2[j0:j1])

    if pool is not None and pool.workers > 1 and nblocks > 1:
        pool.run(block, range(nblocks))
    else:
        for t in range(nblocks):
            block(t)
    return complex(np.add.reduce(partials))


def reduce_norm(u: np.ndarray, pool: WorkerPool | None = None) -> float:
    return float(np.sqrt(max(reduce_dot(u, u, pool).real, 0.0)))
