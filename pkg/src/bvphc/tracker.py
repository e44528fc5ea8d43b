"""Predictor-corrector continuation of homotopy paths from t=1 to t=0.

Paths are advanced in batches: every path keeps its own ``t``, step size and
status, and all arithmetic is elementwise along the batch axis, so a path's
trajectory does not depend on which other paths share the batch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .homotopy import HomotopyStage
from .linalg import condition_number, solve_tridiagonal
from .problem import BvpProblem, SolutionVector, jacobian_dn, residual_dn


class PathStatus(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    SINGULAR = "singular"
    STEP_FAILURE = "step_failure"
    MAX_STEPS = "max_steps"


_CODES = list(PathStatus)
_ACTIVE = -1


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    step_init: float = 1e-2
    step_min: float = 1e-7
    step_max: float = 0.1
    newton_tol: float = 1e-10
    newton_max_iters: int = 10
    corrector_iters: int = 3
    max_steps: int = 10_000
    divergence_bound: float = 1e8
    endpoint_tol: float = 1e-10
    singular_cond: float = 1e8
    grow_after: int = 4
    grow_factor: float = 1.5

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_init <= self.step_max < 1:
            raise ValueError("need 0 < step_min <= step_init <= step_max < 1")
        for name in ("newton_tol", "endpoint_tol", "divergence_bound", "singular_cond"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iters < 1 or self.corrector_iters < 1 or self.max_steps < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class PathResult:
    status: PathStatus
    endpoint: SolutionVector
    steps_taken: int
    start_index: int
    t_final: float = 0.0
    residual: float = float("nan")
    cond: float = float("nan")

    @property
    def converged(self) -> bool:
        return self.status is PathStatus.CONVERGED


def _inf_norm(a: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a), axis=-1)


def _corrector(stage, y, t, cfg):
    """Newton at fixed ``t`` for a batch; returns (y, ok)."""
    ok = np.zeros(y.shape[0], dtype=bool)
    live = np.ones(y.shape[0], dtype=bool)
    prev = np.full(y.shape[0], np.inf)
    y = y.copy()
    for _ in range(cfg.corrector_iters):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        ys, ts = y[idx], t[idx]
        delta = solve_tridiagonal(stage.jacobian_H_y(ys, ts), stage.eval_H(ys, ts))
        ys = ys - delta
        nd = _inf_norm(delta)
        bad = ~np.isfinite(nd) | (nd > 0.5 * prev[idx])
        done = ~bad & (nd <= cfg.newton_tol * (1.0 + _inf_norm(ys)))
        y[idx] = ys
        prev[idx] = nd
        ok[idx[done]] = True
        live[idx[done | bad]] = False
    return y, ok


def _polish(residual, jacobian, y, tol, max_iters):
    """Newton to full precision on an arbitrary tridiagonal system."""
    y = y.copy()
    for _ in range(max_iters):
        delta = solve_tridiagonal(jacobian(y), residual(y))
        delta = np.where(np.isfinite(delta), delta, 0.0)
        y -= delta
        if np.all(_inf_norm(delta) <= 4 * np.finfo(float).eps * (1.0 + _inf_norm(y))):
            break
    return y


def track_paths(stage: HomotopyStage, starts, cfg: TrackerConfig | None = None,
                start_indices=None, trace: dict | None = None) -> list[PathResult]:
    """Track every row of ``starts`` (shape ``(P, N+1)``) from t=1 to t=0.

    If ``trace`` is a dict it receives, per batch row, the list of accepted
    ``(t, y)`` points including the start.
    """
    cfg = cfg or TrackerConfig()
    Y = np.array(starts, dtype=complex, ndmin=2)
    P, n = Y.shape
    if n != stage.n_unknowns:
        raise ValueError(f"start points need {stage.n_unknowns} coordinates, got {n}")
    if start_indices is None:
        start_indices = range(P)
    T = np.ones(P)
    DT = np.full(P, cfg.step_init)
    streak = np.zeros(P, dtype=int)
    steps = np.zeros(P, dtype=int)
    status = np.full(P, _ACTIVE)
    if trace is not None:
        for k in range(P):
            trace[k] = [(1.0, Y[k].copy())]

    while True:
        A = np.flatnonzero(status == _ACTIVE)
        if A.size == 0:
            break
        y, t = Y[A], T[A]
        step = np.minimum(DT[A], t)
        # Euler predictor: dy/dt = -J^{-1} dH/dt, moving t downwards by step
        v = solve_tridiagonal(stage.jacobian_H_y(y, t), stage.dH_dt(y, t))
        t1 = np.where(step >= t, 0.0, t - step)
        y1, ok = _corrector(stage, y + step[:, None] * v, t1, cfg)
        ok &= np.all(np.isfinite(y1), axis=-1)
        steps[A] += 1

        acc, rej = A[ok], A[~ok]
        Y[acc], T[acc] = y1[ok], t1[ok]
        streak[acc] += 1
        if trace is not None:
            for k in acc:
                trace[k].append((float(T[k]), Y[k].copy()))
        grow = acc[streak[acc] >= cfg.grow_after]
        DT[grow] = np.minimum(DT[grow] * cfg.grow_factor, cfg.step_max)
        streak[grow] = 0
        streak[rej] = 0
        DT[rej] *= 0.5

        status[acc[_inf_norm(Y[acc]) > cfg.divergence_bound]] = _CODES.index(PathStatus.DIVERGED)
        status[rej[DT[rej] < cfg.step_min]] = _CODES.index(PathStatus.STEP_FAILURE)
        live = A[status[A] == _ACTIVE]
        status[live[T[live] == 0.0]] = -2  # reached t=0, awaiting endgame
        live = A[status[A] == _ACTIVE]
        status[live[steps[live] >= cfg.max_steps]] = _CODES.index(PathStatus.MAX_STEPS)

    residual = np.full(P, np.nan)
    cond = np.full(P, np.nan)
    E = np.flatnonzero(status == -2)
    if E.size:
        zero = np.zeros(E.size)
        yE = _polish(lambda y: stage.eval_H(y, zero), lambda y: stage.jacobian_H_y(y, zero),
                     Y[E], cfg.endpoint_tol, cfg.newton_max_iters)
        Y[E] = yE
        residual[E] = _inf_norm(stage.eval_H(yE, zero))
        cond[E] = condition_number(stage.jacobian_H_y(yE, zero))
        good = np.isfinite(residual[E]) & (residual[E] < cfg.endpoint_tol)
        status[E[good & (cond[E] <= cfg.singular_cond)]] = _CODES.index(PathStatus.CONVERGED)
        status[E[good & ~(cond[E] <= cfg.singular_cond)]] = _CODES.index(PathStatus.SINGULAR)
        status[E[~good]] = _CODES.index(PathStatus.STEP_FAILURE)

    out = []
    for k, si in enumerate(start_indices):
        out.append(PathResult(
            status=_CODES[status[k]],
            endpoint=SolutionVector(Y[k], origin=(stage.N + 1, int(si))),
            steps_taken=int(steps[k]),
            start_index=int(si),
            t_final=float(T[k]),
            residual=float(residual[k]),
            cond=float(cond[k]),
        ))
    return out


def track_path(stage: HomotopyStage, start, cfg: TrackerConfig | None = None,
               start_index: int = 0) -> PathResult:
    return track_paths(stage, np.asarray(start, dtype=complex)[None, :], cfg, [start_index])[0]


def newton_refine(prob: BvpProblem, y, tol: float = 1e-12, max_iters: int = 20,
                  real: bool = False) -> SolutionVector:
    """Newton iteration on D_N until ``|r|_inf < tol`` and the update stalls.

    With ``real=True`` the iteration runs on the real part only, which keeps
    a real solution exactly real.
    """
    src = y if isinstance(y, SolutionVector) else SolutionVector(y)
    v = src.values.real.astype(complex) if real else src.values.copy()
    for it in range(max_iters + 1):
        r = residual_dn(prob, v)
        if np.max(np.abs(r)) < tol:
            return SolutionVector(v, is_real=real or src.is_real, origin=src.origin, score=src.score)
        if it == max_iters:
            break
        d = solve_tridiagonal(jacobian_dn(prob, v), r)
        if not np.all(np.isfinite(d)):
            raise NoConvergence("singular Jacobian during Newton refinement")
        v = v - (d.real if real else d)
    raise NoConvergence(f"Newton did not reach |r| < {tol:g} in {max_iters} iterations")
