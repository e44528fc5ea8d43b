"""Bootstrapping homotopy continuation for polynomial two-point BVPs."""
from .poly import Polynomial, all_roots, derivative, evaluate
from .problem import BvpProblem, Mesh, SolutionVector, get_preset, jacobian_dn, max_error_vs_exact, residual_dn
from .homotopy import HomotopyStage
from .tracker import PathResult, PathStatus, TrackerConfig, newton_refine, track_path, track_paths
from .bootstrap import (FilterSpec, StageReport, StageSet, StopRule, advance_stage, classify_real, dedup,
                        filter_symmetry, filter_third_derivative, interpolate_to_mesh, run_bootstrap,
                        solve_stage_one, third_derivative_score)

__version__ = "0.1.0"
