"""helmdef: matrix-free multilevel deflation for the 2D Helmholtz equation.

A numpy-based library implementing deflation-preconditioned flexible GMRES
with complex-shifted Laplace smoothing for heterogeneous time-harmonic wave
problems, entirely stencil-based (no global matrix is ever assembled during
a solve).
"""

from .errors import (
    BreakdownError,
    CapacityError,
    ConfigError,
    HelmdefError,
    HierarchyError,
    IoError,
    LevelError,
    MgDivergence,
    ModelError,
    NumericalError,
    ShapeError,
)
from .grid import (
    ComplexField,
    GridHierarchy,
    GridLevel,
    Problem,
    VelocityModel,
    build_hierarchy,
    dimensionless_kmax,
    kh_of,
    marmousi_problem,
    mp1_problem,
    point_source_rhs,
    synthetic_marmousi_velocity,
    wedge_problem,
    wedge_velocity,
)
from .krylov import KrylovReport, StopRule, bicgstab, cslp_iteration_cap, fgmres, gmres
from .madp import (
    ConvergenceReport,
    Definiteness,
    LevelPolicy,
    MadpSolver,
    SolverConfig,
    classify_levels,
    preset,
    solve,
)
from .mg import CslpMultigrid, MgConfig
from .operators import (
    LevelOperator,
    apply_cslp,
    apply_helmholtz,
    arithmetic_intensity,
    assemble_csr,
    cslp_operator,
    helmholtz_operator,
    matvec_flop_byte_counters,
)
from .parallel import Partition, WorkerPool, halo_exchange, partition_grid, reduce_dot
from .stencils import StencilKernel, galerkin_coarsen, level_kernels, verify_chain
from .transfers import prolong, prolong_array, restrict, restrict_array

__version__ = "0.1.0"
