"""Bootstrapping over meshes: solve D_1 directly, then add one node per stage.

Each stage builds the start points of the refinement homotopy from the
previous solution set, tracks every path to t=0, merges duplicate endpoints
and optionally filters the set that seeds the next stage.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .homotopy import GAMMA_ARC, HomotopyStage, stage_gamma
from .poly import Polynomial, all_roots
from .problem import BvpProblem, SolutionVector, pad_boundary
from .tracker import PathResult, PathStatus, TrackerConfig, track_paths

log = logging.getLogger(__name__)

EPS_REAL = 1e-8
DEDUP_TOL = 1e-8
FILTER_KINDS = ("none", "symmetry", "third_derivative", "both")


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "none"
    eps_sym: float = 1e-8
    eps2: float = float("inf")
    start_at_N: int = 1

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"filter kind must be one of {FILTER_KINDS}, got {self.kind!r}")
        if not (self.eps_sym > 0 and self.eps2 > 0):
            raise ValueError("filter thresholds must be positive")

    def active(self, N: int) -> bool:
        return self.kind != "none" and N >= self.start_at_N


@dataclass
class StageReport:
    N: int
    paths_tracked: int
    sols: int
    reals: int
    diverged: int = 0
    singular: int = 0
    failures: int = 0
    duplicates: int = 0
    filtered_out: int = 0
    kept: int = 0
    kept_reals: int = 0
    wall_time: float = 0.0
    seed: int = 0
    gamma: complex = 0j

    def accounting_ok(self) -> bool:
        return (self.sols + self.diverged + self.singular + self.failures + self.duplicates
                == self.paths_tracked)


@dataclass
class StageSet:
    """Solution set of one stage: ``found`` before filtering, ``solutions`` kept."""

    N: int
    solutions: list[SolutionVector]
    report: StageReport
    found: list[SolutionVector] = field(default_factory=list)

    def values(self, which: str = "solutions") -> np.ndarray:
        sols = getattr(self, which)
        if not sols:
            return np.empty((0, self.N), dtype=complex)
        return np.stack([s.values for s in sols])

    @property
    def real_solutions(self) -> list[SolutionVector]:
        return [s for s in self.found if s.is_real]


@dataclass(frozen=True)
class StopRule:
    """Stop once REAL(N) is unchanged for ``stable_for`` consecutive stages."""

    stable_for: Optional[int] = None

    def fires(self, reports: list[StageReport]) -> bool:
        k = self.stable_for
        if k is None or len(reports) < k:
            return False
        tail = [r.reals for r in reports[-k:]]
        return len(set(tail)) == 1


@dataclass
class BootstrapResult:
    reports: list[StageReport]
    final: StageSet
    aborted: bool = False


# ---------------------------------------------------------------------------
# per-solution predicates

def classify_real(y: SolutionVector, eps_real: float = EPS_REAL) -> bool:
    y.is_real = bool(np.max(np.abs(y.values.imag)) < eps_real)
    return y.is_real


def filter_symmetry(y: SolutionVector, eps_sym: float = 1e-8) -> bool:
    """Keep iff ``||y_1| - |y_N|| < eps_sym``."""
    v = y.values
    if v.size < 2:
        return True
    return bool(abs(abs(v[0]) - abs(v[-1])) < eps_sym)


def third_derivative_score(prob: BvpProblem, y) -> np.ndarray | float:
    """Sum over i = 2..N-1 of the mismatch between the central-difference y'''
    and ``p'(y_i) y'_i``; boundary values fill in y_0 and y_{N+1}.

    Accepts a single vector or a batch ``(..., N)``.
    """
    v = y.values if isinstance(y, SolutionVector) else np.asarray(y, dtype=complex)
    N = v.shape[-1]
    h = (prob.b - prob.a) / (N + 1)
    f = pad_boundary(prob, v)
    # f[k] is y_k for k = 0..N+1; i runs 2..N-1 so i-2 and i+2 stay in range
    if N < 3:
        out = np.zeros(v.shape[:-1])
    else:
        i = np.arange(2, N)
        ypp = (f[..., i + 2] - 2 * f[..., i + 1] + 2 * f[..., i - 1] - f[..., i - 2]) / (2 * h**3)
        yp = (f[..., i + 1] - f[..., i - 1]) / (2 * h)
        out = np.sum(np.abs(ypp - prob.dp(f[..., i]) * yp), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def filter_third_derivative(prob: BvpProblem, y: SolutionVector, eps2: float) -> bool:
    if y.N < 4:
        return True
    return bool(third_derivative_score(prob, y) <= eps2)


def keep(prob: BvpProblem, y: SolutionVector, spec: FilterSpec) -> bool:
    if not spec.active(y.N):
        return True
    ok = True
    if spec.kind in ("symmetry", "both"):
        ok &= filter_symmetry(y, spec.eps_sym)
    if spec.kind in ("third_derivative", "both"):
        ok &= filter_third_derivative(prob, y, spec.eps2)
    return ok


def dedup(endpoints: list[SolutionVector], tol: float = DEDUP_TOL) -> list[SolutionVector]:
    """Greedy max-norm clustering; the first-seen member represents its cluster."""
    if len(endpoints) <= 1:
        return list(endpoints)
    V = np.stack([e.values for e in endpoints])
    pts = np.concatenate([V.real, V.imag], axis=1)
    tree = cKDTree(pts)
    merged = np.zeros(len(endpoints), dtype=bool)
    out = []
    for k in range(len(endpoints)):
        if merged[k]:
            continue
        out.append(endpoints[k])
        merged[tree.query_ball_point(pts[k], tol, p=np.inf)] = True
    return out


def interpolate_to_mesh(prob: BvpProblem, y, N_target: int) -> SolutionVector:
    """Piecewise-linear transfer of a solution (boundary values included) to a
    uniform mesh with ``N_target`` interior nodes."""
    src = y if isinstance(y, SolutionVector) else SolutionVector(y)
    if N_target < 1:
        raise ValueError("N_target must be >= 1")
    x_old = prob.mesh(src.N).nodes
    x_new = prob.mesh(N_target).interior
    full = pad_boundary(prob, src.values)
    vals = np.interp(x_new, x_old, full.real) + 1j * np.interp(x_new, x_old, full.imag)
    return SolutionVector(vals, is_real=src.is_real, origin=src.origin)


# ---------------------------------------------------------------------------
# stages

def _finish(prob, N, found, report, filt, eps_real):
    scores = third_derivative_score(prob, np.stack([s.values for s in found])) if found else []
    for s, sc in zip(found, np.atleast_1d(scores)):
        classify_real(s, eps_real)
        s.score = float(sc)
    kept = [s for s in found if keep(prob, s, filt)]
    report.sols = len(found)
    report.reals = sum(s.is_real for s in found)
    report.kept = len(kept)
    report.kept_reals = sum(s.is_real for s in kept)
    report.filtered_out = len(found) - len(kept)
    return StageSet(N, kept, report, found)


def solve_stage_one(prob: BvpProblem, filt: FilterSpec | None = None, eps_real: float = EPS_REAL,
                    dedup_tol: float = DEDUP_TOL) -> StageSet:
    """All roots of ``alpha - 2 y + beta - h^2 p(y)`` with ``h = (b - a)/2``."""
    t0 = time.perf_counter()
    h = (prob.b - prob.a) / 2
    c = -(h * h) * prob.p.coeffs.astype(float)
    c[0] += prob.alpha + prob.beta
    c[1] -= 2.0
    roots = all_roots(Polynomial(c))
    raw = [SolutionVector([r], origin=(1, k)) for k, r in enumerate(roots)]
    found = dedup(raw, dedup_tol)
    report = StageReport(N=1, paths_tracked=len(roots), sols=0, reals=0,
                         duplicates=len(raw) - len(found))
    out = _finish(prob, 1, found, report, filt or FilterSpec(), eps_real)
    report.wall_time = time.perf_counter() - t0
    return out


def start_points(stage: HomotopyStage, prev: np.ndarray) -> np.ndarray:
    """Append every root of the start polynomial to each previous solution.

    Rows are ordered solution-major, so start index ``k*d + j`` belongs to
    previous solution ``k`` and root ``j``.
    """
    d = stage.prob.degree
    out = np.empty((prev.shape[0] * d, stage.N + 1), dtype=complex)
    for k, v in enumerate(prev):
        roots = all_roots(stage.start_polynomial(v[-1]))
        out[k * d:(k + 1) * d, :-1] = v
        out[k * d:(k + 1) * d, -1] = roots
    return out


def _track_chunk(args):
    stage, starts, cfg, idx = args
    return track_paths(stage, starts, cfg, idx)


def advance_stage(prob: BvpProblem, prev: StageSet, cfg: TrackerConfig | None = None,
                  filt: FilterSpec | None = None, seed: int = 0, workers: int = 1,
                  chunk: int = 4096, eps_real: float = EPS_REAL,
                  dedup_tol: float = DEDUP_TOL, gamma_arc: float = GAMMA_ARC) -> StageSet:
    cfg = cfg or TrackerConfig()
    filt = filt or FilterSpec()
    t0 = time.perf_counter()
    N = prev.N + 1
    stage = HomotopyStage(prob, prev.N, stage_gamma(seed, N, gamma_arc))
    starts = start_points(stage, prev.values())
    P = starts.shape[0]

    jobs = [(stage, starts[i:i + chunk], cfg, range(i, min(i + chunk, P))) for i in range(0, P, chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_track_chunk, jobs))
    else:
        parts = [_track_chunk(j) for j in jobs]
    results: list[PathResult] = [r for part in parts for r in part]

    counts = {s: 0 for s in PathStatus}
    for r in results:
        counts[r.status] += 1
    endpoints = [r.endpoint for r in results if r.converged]
    found = dedup(endpoints, dedup_tol)
    report = StageReport(
        N=N, paths_tracked=P, sols=0, reals=0,
        diverged=counts[PathStatus.DIVERGED],
        singular=counts[PathStatus.SINGULAR],
        failures=counts[PathStatus.STEP_FAILURE] + counts[PathStatus.MAX_STEPS],
        duplicates=len(endpoints) - len(found),
        seed=seed, gamma=stage.gamma,
    )
    out = _finish(prob, N, found, report, filt, eps_real)
    report.wall_time = time.perf_counter() - t0
    log.info("N=%d paths=%d sols=%d real=%d diverged=%d singular=%d failed=%d dup=%d kept=%d (%.2fs)",
             N, P, report.sols, report.reals, report.diverged, report.singular, report.failures,
             report.duplicates, report.kept, report.wall_time)
    return out


def run_bootstrap(prob: BvpProblem, N_max: int, cfg: TrackerConfig | None = None,
                  filt: FilterSpec | None = None, seed: int = 0, stop_rule: StopRule | None = None,
                  workers: int = 1, on_stage: Callable[[StageSet], None] | None = None,
                  **kwargs) -> BootstrapResult:
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    filt = filt or FilterSpec()
    stop_rule = stop_rule or StopRule()
    current = solve_stage_one(prob, filt)
    current.report.seed = seed
    reports = [current.report]
    if on_stage:
        on_stage(current)
    for _ in range(2, N_max + 1):
        if stop_rule.fires(reports):
            break
        nxt = advance_stage(prob, current, cfg, filt, seed, workers=workers, **kwargs)
        reports.append(nxt.report)
        if on_stage:
            on_stage(nxt)
        if nxt.report.sols == 0:
            log.warning("stage N=%d produced no convergent paths; stopping", nxt.N)
            return BootstrapResult(reports, nxt, aborted=True)
        current = nxt
    return BootstrapResult(reports, current)
