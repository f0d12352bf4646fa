"""Multilevel adapted deflation preconditioning (A-DEF1) and its presets.

The preconditioner applies, at level l:

    v_hat = R v                    (restriction)
    v_til ~ E^{-1} v_hat           (recursive deflated FGMRES, or the
                                    coarsest CSLP-preconditioned FGMRES)
    t = Z v_til                    (interpolation)
    r = M^{-1} (v - A t)           (shifted-Laplace solve per level policy)
    result = r + t

E is the next level's rediscretized operator, which matches the Galerkin
product R A Z of the transfer pair exactly in the interior.  The outer
solver is flexible GMRES on the finest level with this preconditioner on
the right.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BreakdownError, ConfigError
from .grid import ComplexField, GridHierarchy, Problem, dimensionless_kmax, kh_of
from .krylov import KrylovReport, StopRule, bicgstab, cslp_iteration_cap, fgmres, gmres
from .mg import CslpMultigrid, MgConfig
from .operators import LevelOperator, cslp_operator, helmholtz_operator
from .parallel import Partition, WorkerPool, partition_grid, reduce_dot
from .transfers import prolong_array, restrict_array

__all__ = [
    "Definiteness",
    "classify_levels",
    "LevelPolicy",
    "SolverConfig",
    "ConvergenceReport",
    "preset",
    "PRESET_NAMES",
    "MadpSolver",
    "solve",
    "DEFINITENESS_THRESHOLD",
]

INDEFINITE = "indefinite"
NEGATIVE_DEFINITE = "negative_definite"

# a level is treated as negative definite once max(k) * h_l reaches this
DEFINITENESS_THRESHOLD = 2.0

PRESET_NAMES = ("MADP_V1", "MADP_V2", "MADP_V3", "MADP")

CSLP_MG = "mg"
CSLP_GMRES = "gmres"
CSLP_BICGSTAB = "bicgstab"
CSLP_NONE = "none"

_CSLP_METHODS = (CSLP_MG, CSLP_GMRES, CSLP_BICGSTAB, CSLP_NONE)


@dataclass(frozen=True)
class Definiteness:
    """Per-level spectrum classification, monotone toward coarse levels."""

    levels: tuple
    threshold: float

    def of(self, level: int) -> str:
        return self.levels[level - 1]

    def is_negative_definite(self, level: int) -> bool:
        return self.levels[level - 1] == NEGATIVE_DEFINITE


def classify_levels(hierarchy: GridHierarchy, threshold: float = DEFINITENESS_THRESHOLD) -> Definiteness:
    """Classify every level as indefinite or negative definite by k*h_l."""
    labels = []
    flipped = False
    for l in range(1, hierarchy.ml + 1):
        flipped = flipped or kh_of(l, hierarchy) >= threshold
        labels.append(NEGATIVE_DEFINITE if flipped else INDEFINITE)
    return Definiteness(levels=tuple(labels), threshold=threshold)


@dataclass(frozen=True)
class LevelPolicy:
    """Per-level solver policy.

    ``deflation_cycle_stop`` governs the deflated FGMRES that approximates
    this level's system when called from the level above (None on the finest
    level, where the outer solver owns the stopping rule).  On the coarsest
    level it governs the CSLP-preconditioned FGMRES instead.
    """

    level: int
    cslp_method: str
    cslp_shift: float  # beta2
    cslp_stop: StopRule
    deflation_cycle_stop: StopRule | None

    def __post_init__(self):
        if self.cslp_method not in _CSLP_METHODS:
            raise ConfigError(f"unknown CSLP method {self.cslp_method!r}")


@dataclass(frozen=True)
class SolverConfig:
    ml: int
    policies: tuple
    outer_stop: StopRule = StopRule(1e-6, 150)
    preset_name: str = "custom"
    beta1: float = 1.0
    mg_config: MgConfig = field(default_factory=MgConfig)

    def __post_init__(self):
        if len(self.policies) != self.ml:
            raise ConfigError("one LevelPolicy per level is required")
        if self.policies[0].deflation_cycle_stop is not None:
            raise ConfigError("the finest level has no deflation cycle rule")
        if self.policies[-1].deflation_cycle_stop is None:
            raise ConfigError("the coarsest level needs a solve rule")

    def policy(self, level: int) -> LevelPolicy:
        return self.policies[level - 1]


def preset(name: str, hierarchy: GridHierarchy, threshold: float = DEFINITENESS_THRESHOLD,
           outer_stop: StopRule = StopRule(1e-6, 150)) -> SolverConfig:
    """Named solver configuration.

    MADP_V1
        beta2 = 1/k_dim_max on all levels, GMRES-based CSLP everywhere
        (tolerance 0.1, iteration cap 6 N^(1/4)), single-iteration coarse
        cycles; the coarsest system is solved to 0.1 while it is indefinite
        and with a single iteration once negative definite.
    MADP_V2
        MADP_V1 plus a 0.1 tolerance for the second-level cycle.
    MADP_V3
        beta2 = 0.5 with one multigrid V-cycle as the CSLP approximation on
        levels 1 and 2, GMRES-based CSLP deeper; second-level tolerance 0.1.
    MADP
        MADP_V3 with the second-level tolerance relaxed to 0.3.
    """
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r} (expected one of {PRESET_NAMES})")
    ml = hierarchy.ml
    classes = classify_levels(hierarchy, threshold)
    kdim = dimensionless_kmax(hierarchy)
    small_shift = 1.0 / kdim

    if name in ("MADP_V1", "MADP_V2"):
        beta2 = {l: small_shift for l in range(1, ml + 1)}
        methods = {l: CSLP_GMRES for l in range(1, ml + 1)}
        l2_stop = StopRule(0.1, 100) if name == "MADP_V2" else StopRule(1.0, 1)
    else:
        beta2 = {l: 0.5 for l in range(1, ml + 1)}
        methods = {l: CSLP_MG if l <= 2 else CSLP_GMRES for l in range(1, ml + 1)}
        methods[ml] = CSLP_GMRES  # the coarsest solve is always Krylov based
        l2_tol = 0.3 if name == "MADP" else 0.1
        l2_stop = StopRule(l2_tol, 100)

    if classes.is_negative_definite(ml):
        coarsest_stop = StopRule(1.0, 1)
    else:
        coarsest_stop = StopRule(0.1, 100)

    policies = []
    for l in range(1, ml + 1):
        n_l = hierarchy.level(l).npoints
        if l == 1:
            cycle = None
        elif l == ml:
            cycle = coarsest_stop
        elif l == 2:
            cycle = l2_stop
        else:
            cycle = StopRule(1.0, 1)
        policies.append(
            LevelPolicy(
                level=l,
                cslp_method=methods[l],
                cslp_shift=beta2[l],
                cslp_stop=StopRule(0.1, cslp_iteration_cap(n_l)),
                deflation_cycle_stop=cycle,
            )
        )
    return SolverConfig(ml=ml, policies=tuple(policies), outer_stop=outer_stop, preset_name=name)


@dataclass
class ConvergenceReport:
    """Everything a solve run reports."""

    outer_iterations: int
    converged: bool
    final_relres: float
    residual_history: list
    wall_ms: float
    iteration_wall_ms: list
    preset_name: str
    levels: int
    workers: int
    cycle_iters: dict  # level -> list of per-application iteration counts
    cslp_iters: dict  # level -> list of per-application iteration counts
    matvecs: dict  # level -> operator application count
    model_flops: float
    model_bytes: float

    def cycle_max(self, level: int) -> int:
        vals = self.cycle_iters.get(level, [])
        return max(vals) if vals else 0

    def cslp_max(self, level: int) -> int:
        vals = self.cslp_iters.get(level, [])
        return max(vals) if vals else 0


class MadpSolver:
    """Outer FGMRES with the recursive multilevel A-DEF1 preconditioner."""

    def __init__(self, hierarchy: GridHierarchy, config: SolverConfig, workers: int = 1):
        if config.ml != hierarchy.ml:
            raise ConfigError(
                f"config has {config.ml} levels but the hierarchy has {hierarchy.ml}"
            )
        self.hierarchy = hierarchy
        self.config = config
        self.workers = max(1, int(workers))
        self.partition: Partition = partition_grid(hierarchy, self.workers)
        self.pool = WorkerPool(self.workers)
        self.A: dict[int, LevelOperator] = {}
        self.M: dict[int, LevelOperator] = {}
        self.mg: dict[int, CslpMultigrid] = {}
        for l in range(1, hierarchy.ml + 1):
            pol = config.policy(l)
            self.A[l] = helmholtz_operator(hierarchy, l)
            if pol.cslp_method in (CSLP_GMRES, CSLP_BICGSTAB):
                self.M[l] = cslp_operator(hierarchy, l, pol.cslp_shift, config.beta1)
            elif pol.cslp_method == CSLP_MG:
                lv = hierarchy.level(l)
                self.mg[l] = CslpMultigrid(
                    lv.nx, lv.ny, lv.h, hierarchy.ksq_at(l), hierarchy.boundary,
                    beta2=pol.cslp_shift, beta1=config.beta1, config=config.mg_config,
                )
        self._reset_counters()

    def close(self):
        self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _reset_counters(self):
        ml = self.hierarchy.ml
        self._cycle_iters = {l: [] for l in range(2, ml + 1)}
        self._cslp_iters = {l: [] for l in range(1, ml + 1)}
        self._matvecs = {l: 0 for l in range(1, ml + 1)}

    def _dot(self, u, v):
        return reduce_dot(u, v, self.pool)

    def _apply_A(self, level: int):
        op = self.A[level]
        tiles = self.partition.level_tiles(level)

        def matvec(u):
            self._matvecs[level] += 1
            return op.apply(u, pool=self.pool, tiles=tiles)

        return matvec

    def _solve_cslp(self, level: int, rhs: np.ndarray) -> np.ndarray:
        pol = self.config.policy(level)
        if pol.cslp_method == CSLP_NONE:
            return rhs.copy()
        if pol.cslp_method == CSLP_MG:
            self._cslp_iters[level].append(1)
            return self.mg[level].vcycle(rhs)
        op = self.M[level]
        tiles = self.partition.level_tiles(level)

        def matvec(u):
            return op.apply(u, pool=self.pool, tiles=tiles)

        if pol.cslp_method == CSLP_GMRES:
            x, rep = gmres(matvec, None, rhs, pol.cslp_stop, dot=self._dot)
        else:
            try:
                x, rep = bicgstab(matvec, None, rhs, pol.cslp_stop, dot=self._dot)
            except BreakdownError as err:
                # the best iterate is still a usable preconditioner output
                x, rep = err.x, err.report
        self._cslp_iters[level].append(rep.iterations)
        return x

    def apply_preconditioner(self, level: int, v: np.ndarray) -> np.ndarray:
        """One A-DEF1 application at ``level`` (recursive across levels)."""
        lv_next = level + 1
        vhat = restrict_array(v)
        if lv_next == self.hierarchy.ml:
            stop = self.config.policy(lv_next).deflation_cycle_stop
            vtil, rep = fgmres(
                self._apply_A(lv_next),
                lambda w: self._solve_cslp(lv_next, w),
                vhat,
                stop,
                dot=self._dot,
            )
        else:
            stop = self.config.policy(lv_next).deflation_cycle_stop
            vtil, rep = fgmres(
                self._apply_A(lv_next),
                lambda w: self.apply_preconditioner(lv_next, w),
                vhat,
                stop,
                dot=self._dot,
            )
        self._cycle_iters[lv_next].append(rep.iterations)
        t = prolong_array(vtil, v.shape)
        s = self._apply_A(level)(t)
        r = self._solve_cslp(level, v - s)
        return r + t

    def solve(self, b) -> tuple:
        """Run the outer solve; returns (ComplexField, ConvergenceReport)."""
        self._reset_counters()
        b2d = b.grid_view(self.hierarchy) if isinstance(b, ComplexField) else np.asarray(b)
        t0 = time.perf_counter()
        iteration_times = []

        def on_iter(_it, _relres):
            iteration_times.append((time.perf_counter() - t0) * 1e3)

        x, rep = fgmres(
            self._apply_A(1),
            lambda v: self.apply_preconditioner(1, v),
            b2d,
            self.config.outer_stop,
            dot=self._dot,
            on_iteration=on_iter,
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        flops = 0.0
        nbytes = 0.0
        for l, count in self._matvecs.items():
            n = self.hierarchy.level(l).npoints
            per_pt = _model_flops_per_point(self.A[l].radius)
            flops += count * per_pt * n
            nbytes += count * _model_bytes_per_point(self.A[l].radius) * n
        report = ConvergenceReport(
            outer_iterations=rep.iterations,
            converged=rep.converged,
            final_relres=rep.final_relres,
            residual_history=list(rep.residual_history),
            wall_ms=wall_ms,
            iteration_wall_ms=[0.0] + iteration_times,
            preset_name=self.config.preset_name,
            levels=self.hierarchy.ml,
            workers=self.workers,
            cycle_iters={l: list(v) for l, v in self._cycle_iters.items()},
            cslp_iters={l: list(v) for l, v in self._cslp_iters.items()},
            matvecs=dict(self._matvecs),
            model_flops=flops,
            model_bytes=nbytes,
        )
        return ComplexField(level=1, data=x.ravel()), report


def _model_flops_per_point(radius: int) -> int:
    if radius == 1:
        return 11  # five-point stencil plus wavenumber term
    return 9 * (2 * radius + 1) ** 2


def _model_bytes_per_point(radius: int) -> int:
    if radius == 1:
        return 56
    return 16 * ((2 * radius + 1) ** 2 + 2) + 8 * (2 * radius + 1) ** 2


def solve(problem: Problem, config: SolverConfig, workers: int = 1) -> tuple:
    """Solve a problem with a solver configuration; see :class:`MadpSolver`."""
    with MadpSolver(problem.hierarchy, config, workers=workers) as solver:
        return solver.solve(problem.rhs)
