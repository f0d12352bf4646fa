"""Geometric multigrid V-cycle for the shifted-Laplace preconditioner.

One V(1,1) cycle with damped Jacobi smoothing approximates the inverse of
the radius-1 rediscretized shifted operator.  The sub-hierarchy below the
calling level is built here by injection and is independent of the deflation
hierarchy depth; the coarsest sub-level is factorized densely once (keeping
the whole cycle a linear operation) with an iterative fallback above the
size guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .errors import MgDivergence
from .krylov import StopRule, gmres
from .operators import LevelOperator, assemble_csr, radius1_operator
from .transfers import prolong_array, restrict_array

__all__ = ["MgConfig", "CslpMultigrid"]


@dataclass(frozen=True)
class MgConfig:
    pre_smooth: int = 1
    post_smooth: int = 1
    smoother_damping: float = 0.8
    mg_levels: int = 12
    coarsest_rule: StopRule = StopRule(1e-8, 50)
    direct_coarsest_limit: int = 4096  # points; dense LU below, GMRES above
    divergence_guard: float = 10.0

    def __post_init__(self):
        if self.pre_smooth + self.post_smooth < 1:
            raise ValueError("at least one smoothing step is required")
        if self.mg_levels < 2:
            raise ValueError("mg_levels must be >= 2")


@dataclass
class _SubLevel:
    op: LevelOperator
    dinv: np.ndarray
    lu: tuple | None = None


class CslpMultigrid:
    """V-cycle solver for ``-Laplace - (beta1 + i*beta2) I(k^2)`` on one grid.

    Parameters mirror the grid data of the calling level; the sub-hierarchy
    is coarsened by injection while both interval counts stay even and the
    grid keeps more than five points per direction.
    """

    def __init__(self, nx, ny, h, ksq, boundary, beta2, beta1=1.0, config: MgConfig = MgConfig()):
        self.config = config
        shift = complex(beta1, beta2)
        self.levels: list[_SubLevel] = []
        cur_nx, cur_ny, cur_h = nx, ny, float(h)
        cur_ksq = np.ascontiguousarray(ksq, dtype=np.float64)
        while True:
            op = radius1_operator(cur_nx, cur_ny, cur_h, cur_ksq, boundary, shift)
            self.levels.append(_SubLevel(op=op, dinv=1.0 / op.diagonal()))
            can_coarsen = (
                (cur_nx - 1) % 2 == 0
                and (cur_ny - 1) % 2 == 0
                and min(cur_nx, cur_ny) > 5
                and len(self.levels) < config.mg_levels
            )
            if not can_coarsen:
                break
            cur_nx = (cur_nx - 1) // 2 + 1
            cur_ny = (cur_ny - 1) // 2 + 1
            cur_h *= 2.0
            cur_ksq = cur_ksq[::2, ::2].copy()
        coarsest = self.levels[-1]
        if coarsest.op.npoints <= config.direct_coarsest_limit:
            coarsest.lu = sla.lu_factor(assemble_csr(coarsest.op).toarray())

    @property
    def depth(self) -> int:
        return len(self.levels)

    def _smooth(self, idx, x, b, sweeps):
        lev = self.levels[idx]
        op = lev.op
        omega = self.config.smoother_damping
        pinned = op.dirichlet_slices()
        for _ in range(sweeps):
            xp = op.pad(x)
            out = np.empty_like(x)
            _kernels.jacobi_radius1(
                xp, op.ksq, b, lev.dinv, out, op.lap_coef[1, 1] / 4.0, op.mass_coef[1, 1], omega
            )
            for sl in pinned:  # identity rows relax toward their data values
                out[sl] = x[sl] + omega * (b[sl] - x[sl])
            x = out
        return x

    def _coarse_solve(self, b):
        lev = self.levels[-1]
        if lev.lu is not None:
            return sla.lu_solve(lev.lu, b.ravel()).reshape(b.shape)
        x, _ = gmres(lambda u: lev.op.apply(u), None, b, self.config.coarsest_rule)
        return x

    def _cycle(self, idx, b, x):
        if idx == len(self.levels) - 1:
            return self._coarse_solve(b)
        op = self.levels[idx].op
        x = self._smooth(idx, x, b, self.config.pre_smooth)
        r = b - op.apply(x)
        rc = restrict_array(r)
        for sl in self.levels[idx + 1].op.dirichlet_slices():
            rc[sl] = 0.0  # the coarse error equation has zero Dirichlet data
        ec = self._cycle(idx + 1, rc, np.zeros_like(rc))
        x = x + prolong_array(ec, b.shape)
        x = self._smooth(idx, x, b, self.config.post_smooth)
        return x

    def vcycle(self, b: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        """One V-cycle toward the solution of the shifted system."""
        x = np.zeros_like(b) if x0 is None else x0
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0 and x0 is None:
            return x
        r0 = bnorm if x0 is None else np.linalg.norm(b - self.levels[0].op.apply(x))
        x = self._cycle(0, b, x)
        if bnorm > 0.0:
            post = np.linalg.norm(b - self.levels[0].op.apply(x))
            if post > self.config.divergence_guard * max(r0, bnorm):
                raise MgDivergence(
                    f"V-cycle residual grew from {r0:.3e} to {post:.3e}"
                )
        return x
