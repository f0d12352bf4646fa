"""Run configuration parsing, velocity ingestion and CSV serialization.

Config files are flat ``key = value`` text with ``#`` comments.  Reports and
fields are written as RFC-4180-style CSV with a leading ``#`` metadata block;
floats are printed with 17 significant digits so round trips are bit
faithful.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, IoError, ModelError
from .grid import (
    DIRICHLET,
    SOMMERFELD,
    ComplexField,
    GridHierarchy,
    MARMOUSI_DOMAIN,
    Problem,
    VelocityModel,
    marmousi_problem,
    mp1_problem,
    point_source_rhs,
    build_hierarchy,
    synthetic_marmousi_velocity,
    wedge_problem,
    wedge_velocity,
)
from .krylov import StopRule
from .madp import ConvergenceReport, PRESET_NAMES, SolverConfig, preset

__all__ = [
    "RunConfig",
    "parse_config",
    "parse_config_file",
    "render_config",
    "build_problem",
    "build_solver_config",
    "write_report",
    "write_field",
    "read_field",
    "read_velocity_grid",
    "write_velocity_grid",
]

_PROBLEMS = ("mp1a", "mp1b", "wedge", "marmousi", "file")
_CSLP_METHODS = ("mg", "gmres", "bicgstab", "none")
_LEVEL_FIELDS = ("cslp_method", "cslp_shift", "cslp_tol", "cslp_maxiter", "cycle_tol", "cycle_maxiter")


@dataclass
class RunConfig:
    """Validated flat run configuration."""

    problem: str
    freq_hz: float | None = None
    wavenumber: float | None = None
    kh: float | None = None
    nx: int | None = None
    ny: int | None = None
    levels: int = 3
    preset: str = "MADP"
    workers: int = 1
    out_dir: str = "."
    write_solution: bool = False
    velocity_file: str | None = None
    source_x: float | None = None
    source_y: float | None = None
    boundary: str | None = None
    outer_tol: float = 1e-6
    outer_maxiter: int = 150
    beta2: float | None = None
    cslp_method: str | None = None
    cslp_tol: float | None = None
    cslp_maxiter: int | None = None
    coarsest_tol: float | None = None
    coarsest_maxiter: int | None = None
    definiteness_threshold: float = 2.0
    level_overrides: dict = field(default_factory=dict)  # (level, field) -> value


def _parse_bool(s):
    if s.lower() in ("true", "yes", "1", "on"):
        return True
    if s.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_KEY_PARSERS = {
    "problem": str,
    "freq_hz": float,
    "wavenumber": float,
    "kh": float,
    "nx": int,
    "ny": int,
    "levels": int,
    "preset": str,
    "workers": int,
    "out_dir": str,
    "write_solution": _parse_bool,
    "velocity_file": str,
    "source_x": float,
    "source_y": float,
    "boundary": str,
    "outer_tol": float,
    "outer_maxiter": int,
    "beta2": float,
    "cslp_method": str,
    "cslp_tol": float,
    "cslp_maxiter": int,
    "coarsest_tol": float,
    "coarsest_maxiter": int,
    "definiteness_threshold": float,
}

_LEVEL_FIELD_PARSERS = {
    "cslp_method": str,
    "cslp_shift": float,
    "cslp_tol": float,
    "cslp_maxiter": int,
    "cycle_tol": float,
    "cycle_maxiter": int,
}


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` configuration text.

    Unknown keys, duplicate keys, unparsable values and inconsistent
    combinations raise :class:`ConfigError` with the offending line number.
    """
    values = {}
    level_overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not val:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        if key.startswith("level") and "." in key:
            prefix, _, fld = key.partition(".")
            try:
                level = int(prefix[5:])
            except ValueError:
                raise ConfigError(f"line {lineno}: bad level key {key!r}") from None
            if fld not in _LEVEL_FIELD_PARSERS:
                raise ConfigError(f"line {lineno}: unknown per-level field {fld!r}")
            if (level, fld) in level_overrides:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            try:
                level_overrides[(level, fld)] = _LEVEL_FIELD_PARSERS[fld](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            continue
        if key not in _KEY_PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _KEY_PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None

    if "problem" not in values:
        raise ConfigError("missing required key 'problem'")
    cfg = RunConfig(level_overrides=level_overrides, **values)
    _validate(cfg)
    return cfg


def parse_config_file(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _validate(cfg: RunConfig):
    if cfg.problem not in _PROBLEMS:
        raise ConfigError(f"unknown problem {cfg.problem!r} (expected one of {_PROBLEMS})")
    if (cfg.freq_hz is None) == (cfg.wavenumber is None):
        raise ConfigError("specify exactly one of freq_hz and wavenumber")
    if (cfg.kh is None) == (cfg.nx is None):
        raise ConfigError("specify exactly one of kh and nx")
    if cfg.wavenumber is not None and cfg.problem not in ("mp1a", "mp1b"):
        raise ConfigError("a direct wavenumber is only valid for the constant problems")
    if cfg.preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {cfg.preset!r}")
    if cfg.levels < 2:
        raise ConfigError("levels must be >= 2")
    if cfg.problem == "file" and not cfg.velocity_file:
        raise ConfigError("problem 'file' requires velocity_file")
    if cfg.boundary is not None and cfg.boundary not in (SOMMERFELD, DIRICHLET):
        raise ConfigError(f"unknown boundary {cfg.boundary!r}")
    if cfg.cslp_method is not None and cfg.cslp_method not in _CSLP_METHODS:
        raise ConfigError(f"unknown cslp_method {cfg.cslp_method!r}")
    for (level, fld), val in cfg.level_overrides.items():
        if level < 1 or level > cfg.levels:
            raise ConfigError(f"override level {level} outside 1..{cfg.levels}")
        if fld == "cslp_method" and val not in _CSLP_METHODS:
            raise ConfigError(f"unknown cslp_method {val!r} for level {level}")


def render_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` for all explicitly set values."""
    lines = []
    defaults = RunConfig(problem=cfg.problem)
    for key in _KEY_PARSERS:
        val = getattr(cfg, key)
        if val is None:
            continue
        if key != "problem" and val == getattr(defaults, key):
            continue
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = format(val, ".17g")
        lines.append(f"{key} = {val}")
    for (level, fld), val in sorted(cfg.level_overrides.items()):
        if isinstance(val, float):
            val = format(val, ".17g")
        lines.append(f"level{level}.{fld} = {val}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Problem and solver-config assembly
# ---------------------------------------------------------------------------


def build_problem(cfg: RunConfig) -> Problem:
    """Instantiate the configured benchmark problem."""
    if cfg.problem in ("mp1a", "mp1b"):
        boundary = cfg.boundary or (DIRICHLET if cfg.problem == "mp1a" else SOMMERFELD)
        k = cfg.wavenumber if cfg.wavenumber is not None else 2.0 * math.pi * cfg.freq_hz
        prob = mp1_problem(k=k, kh=cfg.kh, n=cfg.nx, ml=cfg.levels, boundary=boundary)
    elif cfg.problem == "wedge":
        prob = wedge_problem(cfg.freq_hz, kh=cfg.kh, nx=cfg.nx, ml=cfg.levels)
    elif cfg.problem == "marmousi":
        vel = read_velocity_grid(cfg.velocity_file) if cfg.velocity_file else synthetic_marmousi_velocity()
        nx = cfg.nx if cfg.nx is not None else _nx_from_kh(cfg, vel, MARMOUSI_DOMAIN)
        prob = marmousi_problem(cfg.freq_hz, nx=nx, ml=cfg.levels, velocity=vel)
    else:  # file
        vel = read_velocity_grid(cfg.velocity_file)
        (x0, y0) = vel.x0, vel.y0
        x1 = vel.x0 + vel.dx * (vel.values.shape[1] - 1)
        y1 = vel.y0 + vel.dy * (vel.values.shape[0] - 1)
        domain = ((x0, x1), (y0, y1))
        nx = cfg.nx if cfg.nx is not None else _nx_from_kh(cfg, vel, domain)
        h = (x1 - x0) / (nx - 1)
        hier = build_hierarchy(domain, h=h, ml=cfg.levels, velocity=vel, f=cfg.freq_hz,
                               boundary=cfg.boundary or SOMMERFELD)
        src = ((x0 + x1) / 2.0, y1)
        prob = Problem(name="file", hierarchy=hier, rhs=point_source_rhs(hier, src))
    if cfg.source_x is not None or cfg.source_y is not None:
        if cfg.source_x is None or cfg.source_y is None:
            raise ConfigError("source_x and source_y must be given together")
        prob.rhs = point_source_rhs(prob.hierarchy, (cfg.source_x, cfg.source_y))
    return prob


def _nx_from_kh(cfg: RunConfig, vel: VelocityModel, domain) -> int:
    kmax = 2.0 * math.pi * cfg.freq_hz / vel.min_velocity()
    (x0, x1), _ = domain
    return int(round((x1 - x0) / (cfg.kh / kmax))) + 1


def build_solver_config(cfg: RunConfig, hierarchy: GridHierarchy) -> SolverConfig:
    """Preset expanded with the config file's global and per-level overrides."""
    solver_cfg = preset(
        cfg.preset,
        hierarchy,
        threshold=cfg.definiteness_threshold,
        outer_stop=StopRule(cfg.outer_tol, cfg.outer_maxiter),
    )
    policies = list(solver_cfg.policies)
    for idx, pol in enumerate(policies):
        level = idx + 1
        updates = {}
        if cfg.beta2 is not None:
            updates["cslp_shift"] = cfg.beta2
        if cfg.cslp_method is not None:
            updates["cslp_method"] = cfg.cslp_method
        if cfg.cslp_tol is not None or cfg.cslp_maxiter is not None:
            updates["cslp_stop"] = StopRule(
                cfg.cslp_tol if cfg.cslp_tol is not None else pol.cslp_stop.rel_tol,
                cfg.cslp_maxiter if cfg.cslp_maxiter is not None else pol.cslp_stop.max_iters,
            )
        if level == hierarchy.ml and (cfg.coarsest_tol is not None or cfg.coarsest_maxiter is not None):
            tol = cfg.coarsest_tol if cfg.coarsest_tol is not None else pol.deflation_cycle_stop.rel_tol
            cap = cfg.coarsest_maxiter if cfg.coarsest_maxiter is not None else pol.deflation_cycle_stop.max_iters
            if tol >= 1.0:
                cap = 1  # the single-iteration convention
            updates["deflation_cycle_stop"] = StopRule(tol, cap)
        for fld in _LEVEL_FIELDS:
            if (level, fld) not in cfg.level_overrides:
                continue
            val = cfg.level_overrides[(level, fld)]
            if fld == "cslp_method":
                updates["cslp_method"] = val
            elif fld == "cslp_shift":
                updates["cslp_shift"] = val
            elif fld == "cslp_tol":
                base = updates.get("cslp_stop", pol.cslp_stop)
                updates["cslp_stop"] = StopRule(val, base.max_iters)
            elif fld == "cslp_maxiter":
                base = updates.get("cslp_stop", pol.cslp_stop)
                updates["cslp_stop"] = StopRule(base.rel_tol, val)
            elif fld in ("cycle_tol", "cycle_maxiter") and pol.deflation_cycle_stop is not None:
                base = updates.get("deflation_cycle_stop", pol.deflation_cycle_stop)
                if fld == "cycle_tol":
                    cap = 1 if val >= 1.0 else base.max_iters
                    updates["deflation_cycle_stop"] = StopRule(val, cap)
                else:
                    updates["deflation_cycle_stop"] = StopRule(base.rel_tol, val)
        if updates:
            policies[idx] = replace(pol, **updates)
    return replace(solver_cfg, policies=tuple(policies), preset_name=cfg.preset)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_report(report: ConvergenceReport, path: str):
    """Report CSV: metadata comment block, then one row per outer iteration."""
    lines = ["# helmdef convergence report"]
    lines.append(f"# preset = {report.preset_name}")
    lines.append(f"# levels = {report.levels}")
    lines.append(f"# workers = {report.workers}")
    lines.append(f"# converged = {'true' if report.converged else 'false'}")
    lines.append(f"# outer_iterations = {report.outer_iterations}")
    lines.append(f"# final_relres = {_fmt(report.final_relres)}")
    lines.append(f"# wall_ms = {_fmt(report.wall_ms)}")
    for l in range(2, report.levels + 1):
        vals = report.cycle_iters.get(l, [])
        lines.append(
            f"# level{l}_cycle_iters_max = {max(vals) if vals else 0}"
        )
    for l in range(1, report.levels + 1):
        vals = report.cslp_iters.get(l, [])
        lines.append(f"# level{l}_cslp_iters_max = {max(vals) if vals else 0}")
    for l in range(1, report.levels + 1):
        lines.append(f"# level{l}_matvecs = {report.matvecs.get(l, 0)}")
    lines.append(f"# model_flops = {_fmt(report.model_flops)}")
    lines.append(f"# model_bytes = {_fmt(report.model_bytes)}")
    lines.append("outer_iter,relres,wall_ms")
    times = report.iteration_wall_ms
    for i, relres in enumerate(report.residual_history):
        t = times[i] if i < len(times) else times[-1]
        lines.append(f"{i},{_fmt(relres)},{_fmt(t)}")
    _write_text(path, "\n".join(lines) + "\n")


def write_field(fld: ComplexField, hierarchy: GridHierarchy, path: str):
    """Field CSV with columns i,j,x,y,re,im (i is the fast direction)."""
    lv = hierarchy.level(fld.level)
    data = fld.grid_view(hierarchy)
    xs, ys = lv.coords()
    lines = [
        "# helmdef field",
        f"# level = {fld.level}",
        f"# nx = {lv.nx}",
        f"# ny = {lv.ny}",
        "i,j,x,y,re,im",
    ]
    for j in range(lv.ny):
        for i in range(lv.nx):
            z = data[j, i]
            lines.append(f"{i},{j},{_fmt(xs[i])},{_fmt(ys[j])},{_fmt(z.real)},{_fmt(z.imag)}")
    _write_text(path, "\n".join(lines) + "\n")


def read_field(path: str) -> ComplexField:
    """Read a field CSV written by :func:`write_field`."""
    level, nx, ny = 1, None, None
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, _, val = body.partition("=")
                        key = key.strip()
                        if key == "level":
                            level = int(val)
                        elif key == "nx":
                            nx = int(val)
                        elif key == "ny":
                            ny = int(val)
                    continue
                if line.startswith("i,"):
                    continue
                parts = line.split(",")
                rows.append((int(parts[0]), int(parts[1]), float(parts[4]), float(parts[5])))
    except OSError as exc:
        raise IoError(f"cannot read field {path}: {exc}") from None
    if nx is None or ny is None:
        raise IoError(f"field file {path} lacks grid metadata")
    data = np.zeros((ny, nx), dtype=np.complex128)
    for i, j, re, im in rows:
        data[j, i] = complex(re, im)
    return ComplexField(level=level, data=data.ravel())


def _write_text(path: str, text: str):
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------------------
# Velocity rasters
# ---------------------------------------------------------------------------


def read_velocity_grid(path: str) -> VelocityModel:
    """Read the ASCII raster format: header ``nx ny dx dy x0 y0`` then values.

    Values are row-major with x fastest, in m/s.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise IoError(f"cannot read velocity grid {path}: {exc}") from None
    if len(tokens) < 6:
        raise IoError(f"velocity grid {path} is missing its header")
    try:
        nxv, nyv = int(tokens[0]), int(tokens[1])
        dx, dy, x0, y0 = (float(t) for t in tokens[2:6])
        vals = np.array([float(t) for t in tokens[6:]], dtype=np.float64)
    except ValueError as exc:
        raise IoError(f"velocity grid {path}: {exc}") from None
    if vals.size != nxv * nyv:
        raise IoError(
            f"velocity grid {path}: expected {nxv * nyv} samples, found {vals.size}"
        )
    model = VelocityModel(
        kind="gridfile", values=vals.reshape(nyv, nxv), dx=dx, dy=dy, x0=x0, y0=y0
    )
    try:
        model.validate()
    except ModelError as exc:
        raise IoError(f"velocity grid {path}: {exc}") from None
    return model


def write_velocity_grid(model: VelocityModel, path: str):
    if model.kind != "gridfile":
        raise IoError("only gridfile models can be written")
    nyv, nxv = model.values.shape
    parts = [f"{nxv} {nyv} {_fmt(model.dx)} {_fmt(model.dy)} {_fmt(model.x0)} {_fmt(model.y0)}"]
    for j in range(nyv):
        parts.append(" ".join(_fmt(v) for v in model.values[j]))
    _write_text(path, "\n".join(parts) + "\n")
