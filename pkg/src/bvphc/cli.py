"""Command-line front end: presets or problem files in, tables and CSVs out.

Problem files are YAML mappings::

    name: bvp2
    a: 0
    b: 1
    alpha: 0.5
    beta: 0.333333333333333
    coeffs: [0, 0, 0, 2]     # c_0 .. c_d of p(y) in y'' = p(y)
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bootstrap import BootstrapResult, FilterSpec, StageSet, StopRule, interpolate_to_mesh, run_bootstrap
from .homotopy import GAMMA_ARC
from .poly import Polynomial
from .problem import PRESETS, BvpProblem, get_preset, max_error_vs_exact
from .tracker import NoConvergence, TrackerConfig, newton_refine

log = logging.getLogger("bvphc")

EMIT_CHOICES = ("summary", "solutions", "plotdata", "errors")
FILTER_ALIASES = {"none": "none", "sym": "symmetry", "yppp": "third_derivative", "both": "both"}
REQUIRED_FIELDS = ("a", "b", "alpha", "beta", "coeffs")


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


def _field_line(text: str, key: str) -> int | None:
    for k, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith(f"{key}:"):
            return k
    return None


def parse_problem_file(path) -> BvpProblem:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ParseError(f"{path}: malformed document{where}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a mapping of fields, got {type(doc).__name__}")

    def where(key):
        line = _field_line(text, key)
        return f"{path}:{line}" if line else str(path)

    missing = [k for k in REQUIRED_FIELDS if k not in doc]
    if missing:
        raise ParseError(f"{path}: missing field(s) {', '.join(missing)}")
    unknown = sorted(set(doc) - set(REQUIRED_FIELDS) - {"name"})
    if unknown:
        raise ParseError(f"{where(unknown[0])}: unknown field {unknown[0]!r}")

    vals = {}
    for key in ("a", "b", "alpha", "beta"):
        try:
            vals[key] = float(doc[key])
        except (TypeError, ValueError):
            raise ParseError(f"{where(key)}: field {key!r} must be a number, got {doc[key]!r}") from None
    coeffs = doc["coeffs"]
    if not isinstance(coeffs, list) or not coeffs:
        raise ParseError(f"{where('coeffs')}: field 'coeffs' must be a non-empty list")
    try:
        coeffs = [float(c) for c in coeffs]
    except (TypeError, ValueError):
        raise ParseError(f"{where('coeffs')}: coefficients must be numbers") from None

    if coeffs[-1] == 0:
        raise ValidationError(f"{where('coeffs')}: leading coefficient c_d must be nonzero")
    if len(coeffs) < 2:
        raise ValidationError(f"{where('coeffs')}: p(y) must have degree >= 1")
    if not all(math.isfinite(v) for v in list(vals.values()) + coeffs):
        raise ValidationError(f"{path}: all values must be finite")
    if not vals["b"] > vals["a"]:
        raise ValidationError(f"{where('b')}: need b > a")
    return BvpProblem(vals["a"], vals["b"], vals["alpha"], vals["beta"], Polynomial(coeffs),
                      str(doc.get("name", path.stem)))


@dataclass
class RunConfig:
    problem: str
    lam: float | None = None
    N_max: int = 5
    filter: FilterSpec = field(default_factory=FilterSpec)
    seed: int = 0
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    output_dir: Path = Path("out")
    emit: frozenset = frozenset(EMIT_CHOICES)
    stable_for: int | None = None
    gamma_arc: float = GAMMA_ARC
    workers: int = 1
    refine_n: int | None = None
    all_stages: bool = False

    def load_problem(self) -> BvpProblem:
        if self.problem in PRESETS:
            return get_preset(self.problem, self.lam)
        path = Path(self.problem)
        if not path.is_file():
            raise ValidationError(f"{self.problem!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
        if self.lam is not None:
            raise ValidationError("--lambda applies to presets only; put lambda into the file's coefficients")
        return parse_problem_file(path)


# ---------------------------------------------------------------------------
# writers

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def format_summary(prob: BvpProblem, cfg: RunConfig, result: BootstrapResult) -> str:
    cols = ["N", "SOLS(N)", "REAL(N)", "paths", "diverged", "singular", "failures",
            "duplicates", "filtered", "kept", "kept_real", "arg(gamma)"]
    rows = []
    for r in result.reports:
        arg = f"{np.angle(r.gamma):+.6e}" if r.N > 1 else "-"
        rows.append([str(r.N), str(r.sols), str(r.reals), str(r.paths_tracked), str(r.diverged),
                     str(r.singular), str(r.failures), str(r.duplicates), str(r.filtered_out),
                     str(r.kept), str(r.kept_reals), arg])
    widths = [max(len(c), *(len(row[k]) for row in rows)) for k, c in enumerate(cols)]
    lines = [
        f"# problem: {prob.name}",
        f"# p coefficients (c_0..c_d): {' '.join(f'{c:.6e}' for c in prob.p.coeffs)}",
        f"# interval [{prob.a:.6e}, {prob.b:.6e}], alpha {prob.alpha:.6e}, beta {prob.beta:.6e}",
        f"# seed {cfg.seed}, filter {cfg.filter.kind} from N={cfg.filter.start_at_N}",
        "  ".join(c.rjust(w) for c, w in zip(cols, widths)),
    ]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows]
    if result.aborted:
        lines.append(f"# aborted: stage N={result.reports[-1].N} produced no convergent paths")
    return "\n".join(lines) + "\n"


def write_solutions_csv(path: Path, prob: BvpProblem, stage: StageSet) -> None:
    kept_ids = {id(s) for s in stage.solutions}
    x = prob.mesh(stage.N).interior
    lines = ["solution,node,x,re,im,is_real,filter_score,kept"]
    for k, s in enumerate(stage.found):
        for i, (xi, v) in enumerate(zip(x, s.values), start=1):
            lines.append(f"{k},{i},{_fmt(xi)},{_fmt(v.real)},{_fmt(v.imag)},{int(s.is_real)},"
                         f"{_fmt(s.score)},{int(id(s) in kept_ids)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_solutions_csv(path) -> dict[int, np.ndarray]:
    """Inverse of :func:`write_solutions_csv`: solution index -> complex values."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    data = np.atleast_1d(data)
    out: dict[int, list] = {}
    for row in data:
        out.setdefault(int(row["solution"]), []).append(complex(row["re"], row["im"]))
    return {k: np.array(v) for k, v in out.items()}


def write_plot_data(out_dir: Path, prob: BvpProblem, stage: StageSet) -> list[Path]:
    paths = []
    x = prob.mesh(stage.N).nodes
    reals = [s for s in stage.solutions if s.is_real]
    for k, s in enumerate(reals, start=1):
        y = np.concatenate([[prob.alpha], s.values.real, [prob.beta]])
        p = out_dir / f"plot_{k}.dat"
        p.write_text("".join(f"{_fmt(a)} {_fmt(b)}\n" for a, b in zip(x, y)), encoding="utf-8")
        paths.append(p)
    return paths


def error_row(prob: BvpProblem, stage: StageSet) -> tuple | None:
    """Best max-norm error among the stage's real solutions after real Newton polish."""
    best = None
    for s in stage.real_solutions:
        try:
            ref = newton_refine(prob, s, real=True)
        except NoConvergence:
            continue
        e = max_error_vs_exact(prob, ref)
        best = e if best is None else min(best, e)
    if best is None:
        return None
    return error_table_row(prob, stage.N, best)


def error_table_row(prob: BvpProblem, N: int, err: float) -> tuple:
    # reference error tables use h = (b - a)/(N + 2); the mesh spacing is (b - a)/(N + 1)
    h2_table = ((prob.b - prob.a) / (N + 2)) ** 2
    h2_mesh = ((prob.b - prob.a) / (N + 1)) ** 2
    return (N, err, h2_table, err / h2_table, h2_mesh, err / h2_mesh)


def format_errors(rows) -> str:
    lines = ["N,max_error,h2_table,ratio_table,h2_mesh,ratio_mesh"]
    for N, *vals in rows:
        lines.append(f"{N}," + ",".join(f"{v:.6e}" for v in vals))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------

def run_experiment(cfg: RunConfig) -> int:
    try:
        prob = cfg.load_problem()
    except (ParseError, ValidationError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors: list[tuple] = []
    summary_path = out / "summary.txt"

    def on_stage(stage: StageSet):
        if "errors" in cfg.emit and prob.exact_solution is not None:
            row = error_row(prob, stage)
            if row:
                errors.append(row)
        if "solutions" in cfg.emit and cfg.all_stages:
            write_solutions_csv(out / f"stage_{stage.N}_solutions.csv", prob, stage)

    result = run_bootstrap(prob, cfg.N_max, cfg.tracker, cfg.filter, cfg.seed,
                           StopRule(cfg.stable_for), workers=cfg.workers, on_stage=on_stage,
                           gamma_arc=cfg.gamma_arc)
    final = result.final

    if "summary" in cfg.emit:
        summary_path.write_text(format_summary(prob, cfg, result), encoding="utf-8")
    if "solutions" in cfg.emit and not cfg.all_stages:
        write_solutions_csv(out / f"stage_{final.N}_solutions.csv", prob, final)
    if "plotdata" in cfg.emit:
        write_plot_data(out, prob, final)

    if cfg.refine_n and cfg.refine_n > final.N:
        refined = []
        for k, s in enumerate(s for s in final.solutions if s.is_real):
            try:
                r = newton_refine(prob, interpolate_to_mesh(prob, s, cfg.refine_n), real=True)
            except NoConvergence as exc:
                log.warning("refinement of real solution %d failed: %s", k, exc)
                continue
            refined.append(r)
            x = prob.mesh(cfg.refine_n).nodes
            y = np.concatenate([[prob.alpha], r.values.real, [prob.beta]])
            (out / f"refined_{k + 1}.dat").write_text(
                "".join(f"{_fmt(a)} {_fmt(b)}\n" for a, b in zip(x, y)), encoding="utf-8")
        if prob.exact_solution is not None and refined:
            errors.append(error_table_row(prob, cfg.refine_n,
                                          min(max_error_vs_exact(prob, r) for r in refined)))

    if "errors" in cfg.emit and errors:
        (out / "errors.csv").write_text(format_errors(errors), encoding="utf-8")

    for r in result.reports:
        log.info("N=%d SOLS=%d REAL=%d paths=%d (%.2fs)", r.N, r.sols, r.reals, r.paths_tracked, r.wall_time)
    return 3 if result.aborted else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bvphc",
        description="Find solutions of finite-difference discretizations of y'' = p(y) by "
                    "bootstrapping homotopy continuation over refined meshes.")
    ap.add_argument("--problem", required=True, help=f"preset ({', '.join(PRESETS)}) or problem file")
    ap.add_argument("--lambda", dest="lam", type=float, default=None, help="preset parameter lambda")
    ap.add_argument("--max-n", type=int, default=5, help="largest number of interior mesh points")
    ap.add_argument("--filter", choices=sorted(FILTER_ALIASES), default="none")
    ap.add_argument("--eps-sym", type=float, default=1e-8)
    ap.add_argument("--eps2", type=float, default=math.inf, help="y''' filter threshold")
    ap.add_argument("--filter-start-n", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gamma-arc", type=float, default=GAMMA_ARC,
                    help="sample gamma with |arg gamma| below this (pi for the full circle)")
    ap.add_argument("--stable-for", type=int, default=None,
                    help="stop once REAL(N) is unchanged for this many stages")
    ap.add_argument("--refine-n", type=int, default=None,
                    help="interpolate final real solutions to this mesh and polish with Newton")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out")
    ap.add_argument("--emit", default=",".join(EMIT_CHOICES),
                    help=f"comma-separated subset of {','.join(EMIT_CHOICES)}")
    ap.add_argument("--all-stages", action="store_true", help="write a solutions CSV for every stage")
    d = TrackerConfig()
    ap.add_argument("--step-init", type=float, default=d.step_init)
    ap.add_argument("--step-min", type=float, default=d.step_min)
    ap.add_argument("--step-max", type=float, default=d.step_max)
    ap.add_argument("--newton-tol", type=float, default=d.newton_tol)
    ap.add_argument("--endpoint-tol", type=float, default=d.endpoint_tol)
    ap.add_argument("--max-steps", type=int, default=d.max_steps)
    ap.add_argument("--divergence-bound", type=float, default=d.divergence_bound)
    ap.add_argument("--singular-cond", type=float, default=d.singular_cond)
    ap.add_argument("--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    emit = frozenset(e.strip() for e in args.emit.split(",") if e.strip())
    bad = emit - set(EMIT_CHOICES)
    if bad:
        raise ValidationError(f"unknown --emit entries: {', '.join(sorted(bad))}")
    if args.max_n < 1:
        raise ValidationError("--max-n must be >= 1")
    tracker = TrackerConfig(step_init=args.step_init, step_min=args.step_min, step_max=args.step_max,
                            newton_tol=args.newton_tol, endpoint_tol=args.endpoint_tol,
                            max_steps=args.max_steps, divergence_bound=args.divergence_bound,
                            singular_cond=args.singular_cond)
    filt = FilterSpec(FILTER_ALIASES[args.filter], eps_sym=args.eps_sym, eps2=args.eps2,
                      start_at_N=args.filter_start_n)
    return RunConfig(problem=args.problem, lam=args.lam, N_max=args.max_n, filter=filt, seed=args.seed,
                     tracker=tracker, output_dir=Path(args.out), emit=emit, stable_for=args.stable_for,
                     gamma_arc=args.gamma_arc, workers=args.workers, refine_n=args.refine_n,
                     all_stages=args.all_stages)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        ap.error(str(exc))
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
