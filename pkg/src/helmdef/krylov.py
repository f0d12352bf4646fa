"""Krylov solvers: flexible GMRES, GMRES and Bi-CGSTAB for complex systems.

All solvers stop on the relative residual ``|r| / |b|`` or an iteration cap
(:class:`StopRule`), start from a zero initial guess unless given one, and
never restart.  FGMRES keeps the preconditioned vectors so the preconditioner
may change from iteration to iteration (it usually does here: every level of
the deflation hierarchy preconditions with nested iterative solves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BreakdownError, NumericalError

__all__ = [
    "StopRule",
    "KrylovReport",
    "fgmres",
    "gmres",
    "bicgstab",
    "cslp_iteration_cap",
]

_BREAKDOWN_EPS = 1e-30


@dataclass(frozen=True)
class StopRule:
    """Relative tolerance plus iteration cap.

    A tolerance of 1.0 follows the single-iteration convention: the first
    iterate always satisfies it, so exactly one iteration is performed.
    """

    rel_tol: float
    max_iters: int

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ValueError("rel_tol must be nonnegative")


@dataclass
class KrylovReport:
    iterations: int
    final_relres: float
    residual_history: list = field(default_factory=list)
    converged: bool = False


def _default_dot(u, v):
    return complex(np.vdot(u, v))


def fgmres(apply_A, apply_M, b, stop: StopRule, x0=None, dot=None, on_iteration=None):
    """Right-preconditioned flexible GMRES without restarts.

    Parameters
    ----------
    apply_A : callable
        Linear operator, ndarray -> ndarray.
    apply_M : callable or None
        Flexible right preconditioner (may differ per call); None for none.
    b : ndarray
        Right-hand side (any shape; treated as one flat vector).
    stop : StopRule
    x0 : ndarray, optional
        Initial guess; defaults to zero.
    dot : callable, optional
        Inner product ``(u, v) -> complex`` with u conjugated; defaults to
        ``np.vdot``.  Supply a deterministic parallel reduction here.
    on_iteration : callable, optional
        ``(iteration, relres)`` hook invoked after every iteration.

    Returns
    -------
    (ndarray, KrylovReport)
    """
    dot = dot or _default_dot

    def nrm(u):
        return math.sqrt(max(dot(u, u).real, 0.0))

    bnorm = nrm(b)
    if x0 is None:
        x0 = np.zeros_like(b)
        r0 = b.copy()
    else:
        r0 = b - apply_A(x0)
    if bnorm == 0.0:
        return x0.copy(), KrylovReport(0, 0.0, [0.0], True)

    beta = nrm(r0)
    relres = beta / bnorm
    history = [relres]
    if relres <= stop.rel_tol and stop.rel_tol < 1.0:
        return x0.copy(), KrylovReport(0, relres, history, True)
    if not math.isfinite(beta):
        raise NumericalError("initial residual is not finite")

    V = [r0 / beta]
    X = []
    r_cols = []  # upper-triangular columns after rotations
    cs, sn = [], []
    g = [beta]
    converged = False
    iterations = 0

    for j in range(stop.max_iters):
        z = apply_M(V[j]) if apply_M is not None else V[j]
        if apply_M is not None:
            X.append(z)
        w = apply_A(z)
        hcol = np.zeros(j + 2, dtype=np.complex128)
        for i in range(j + 1):
            hij = dot(V[i], w)
            hcol[i] = hij
            w = w - hij * V[i]
        hnext = nrm(w)
        hcol[j + 1] = hnext
        if not np.all(np.isfinite(hcol.view(np.float64))):
            raise NumericalError("non-finite Hessenberg entries")

        for i in range(j):
            t = cs[i] * hcol[i] + sn[i] * hcol[i + 1]
            hcol[i + 1] = -np.conj(sn[i]) * hcol[i] + cs[i] * hcol[i + 1]
            hcol[i] = t
        h1, h2 = hcol[j], hcol[j + 1]
        if abs(h2) == 0.0:
            c, s = 1.0, 0.0 + 0.0j
        elif abs(h1) == 0.0:
            c, s = 0.0, 1.0 + 0.0j
        else:
            t = math.hypot(abs(h1), abs(h2))
            c = abs(h1) / t
            s = (h1 / abs(h1)) * np.conj(h2) / t
        cs.append(c)
        sn.append(s)
        hcol[j] = c * h1 + s * h2
        r_cols.append(hcol[: j + 1].copy())
        g.append(-np.conj(s) * g[j])
        g[j] = c * g[j]

        iterations = j + 1
        relres = abs(g[j + 1]) / bnorm
        history.append(relres)
        if on_iteration is not None:
            on_iteration(iterations, relres)
        happy = hnext < _BREAKDOWN_EPS
        if happy or relres <= stop.rel_tol:
            converged = True
            break
        V.append(w / hnext)

    # solve the least-squares system R y = g
    m = iterations
    y = np.zeros(m, dtype=np.complex128)
    for i in range(m - 1, -1, -1):
        acc = g[i]
        for jj in range(i + 1, m):
            acc -= r_cols[jj][i] * y[jj]
        y[i] = acc / r_cols[i][i]
    basis = X if apply_M is not None else V
    x = x0.copy()
    for i in range(m):
        x += y[i] * basis[i]

    final = nrm(b - apply_A(x)) / bnorm
    if not math.isfinite(final):
        raise NumericalError("non-finite solution")
    return x, KrylovReport(m, final, history, converged)


def gmres(apply_A, apply_M, b, stop: StopRule, x0=None, dot=None, on_iteration=None):
    """GMRES with a fixed right preconditioner (same engine as fgmres)."""
    return fgmres(apply_A, apply_M, b, stop, x0=x0, dot=dot, on_iteration=on_iteration)


def bicgstab(apply_A, apply_M, b, stop: StopRule, x0=None, dot=None):
    """Right-preconditioned Bi-CGSTAB.

    Raises :class:`BreakdownError` (carrying the best iterate) when rho or
    omega vanish.
    """
    dot = dot or _default_dot

    def nrm(u):
        return math.sqrt(max(dot(u, u).real, 0.0))

    bnorm = nrm(b)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_A(x0)
    if bnorm == 0.0:
        return x, KrylovReport(0, 0.0, [0.0], True)

    relres = nrm(r) / bnorm
    history = [relres]
    if relres <= stop.rel_tol and stop.rel_tol < 1.0:
        return x, KrylovReport(0, relres, history, True)

    rhat = r.copy()
    rho = 1.0 + 0.0j
    alpha = 1.0 + 0.0j
    omega = 1.0 + 0.0j
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    converged = False
    iterations = 0

    for it in range(1, stop.max_iters + 1):
        rho_new = dot(rhat, r)
        if abs(rho_new) < _BREAKDOWN_EPS * bnorm * bnorm:
            raise BreakdownError(
                "rho vanished in Bi-CGSTAB",
                x=x,
                report=KrylovReport(iterations, history[-1], history, False),
            )
        beta_factor = (rho_new / rho) * (alpha / omega)
        p = r + beta_factor * (p - omega * v)
        phat = apply_M(p) if apply_M is not None else p
        v = apply_A(phat)
        denom = dot(rhat, v)
        if abs(denom) < _BREAKDOWN_EPS * bnorm * bnorm:
            raise BreakdownError(
                "alpha denominator vanished in Bi-CGSTAB",
                x=x,
                report=KrylovReport(iterations, history[-1], history, False),
            )
        alpha = rho_new / denom
        s = r - alpha * v
        x = x + alpha * phat
        iterations = it
        srel = nrm(s) / bnorm
        if srel <= stop.rel_tol:
            history.append(srel)
            converged = True
            break
        shat = apply_M(s) if apply_M is not None else s
        t = apply_A(shat)
        tt = dot(t, t)
        if abs(tt) < _BREAKDOWN_EPS:
            raise BreakdownError(
                "omega denominator vanished in Bi-CGSTAB",
                x=x,
                report=KrylovReport(iterations, history[-1], history, False),
            )
        omega = dot(t, s) / tt
        if abs(omega) < _BREAKDOWN_EPS:
            raise BreakdownError(
                "omega vanished in Bi-CGSTAB",
                x=x,
                report=KrylovReport(iterations, history[-1], history, False),
            )
        x = x + omega * shat
        r = s - omega * t
        relres = nrm(r) / bnorm
        history.append(relres)
        if not math.isfinite(relres):
            raise NumericalError("non-finite residual in Bi-CGSTAB")
        if relres <= stop.rel_tol:
            converged = True
            break
        rho = rho_new

    final = nrm(b - apply_A(x)) / bnorm
    return x, KrylovReport(iterations, final, history, converged)


def cslp_iteration_cap(level_size: int, c_it: float = 6.0) -> int:
    """Iteration cap ceil(c_it * N**(1/4)) for shifted-Laplace solves."""
    if level_size < 1:
        raise ValueError("level size must be >= 1")
    return int(math.ceil(c_it * float(level_size) ** 0.25 - 1e-9))
