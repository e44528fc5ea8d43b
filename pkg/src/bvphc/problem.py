"""Polynomial two-point BVPs ``y'' = p(y)`` and their central-difference systems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import Tridiagonal
from .poly import Polynomial, derivative


class MissingExactSolution(ValueError):
    pass


@dataclass(frozen=True)
class BvpProblem:
    """``y'' = p(y)`` on ``[a, b]`` with ``y(a) = alpha`` and ``y(b) = beta``."""

    a: float
    b: float
    alpha: float
    beta: float
    p: Polynomial
    name: str = "custom"
    exact_solution: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")
        if self.p.degree < 1:
            raise ValueError("right-hand side polynomial must have degree >= 1")

    @property
    def degree(self) -> int:
        return self.p.degree

    @property
    def dp(self) -> Polynomial:
        return derivative(self.p)

    def mesh(self, N: int) -> "Mesh":
        return Mesh.uniform(self.a, self.b, N)


@dataclass(frozen=True)
class Mesh:
    N: int
    h: float
    nodes: np.ndarray

    @classmethod
    def uniform(cls, a: float, b: float, N: int) -> "Mesh":
        if N < 1:
            raise ValueError("need at least one interior node")
        h = (b - a) / (N + 1)
        nodes = a + h * np.arange(N + 2)
        nodes[-1] = b
        return cls(N, h, nodes)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass
class SolutionVector:
    """One point of a stage's solution set: values at the interior nodes."""

    values: np.ndarray
    is_real: bool = False
    origin: tuple[int, int] = (0, 0)
    score: float = float("nan")

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).ravel()

    @property
    def N(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size


def _values(y) -> np.ndarray:
    if isinstance(y, SolutionVector):
        return y.values
    return np.asarray(y, dtype=complex)


def pad_boundary(prob: BvpProblem, y: np.ndarray) -> np.ndarray:
    """Prepend ``alpha`` and append ``beta`` along the last axis."""
    y = np.asarray(y, dtype=complex)
    lead = np.full(y.shape[:-1] + (1,), prob.alpha, dtype=complex)
    tail = np.full(y.shape[:-1] + (1,), prob.beta, dtype=complex)
    return np.concatenate([lead, y, tail], axis=-1)


def residual_dn(prob: BvpProblem, y) -> np.ndarray:
    """Rows ``y[i-1] - 2 y[i] + y[i+1] - h^2 p(y[i])`` of D_N.

    ``y`` may carry leading batch axes; N is its last dimension.
    """
    y = _values(y)
    N = y.shape[-1]
    h = (prob.b - prob.a) / (N + 1)
    full = pad_boundary(prob, y)
    return full[..., :-2] - 2.0 * y + full[..., 2:] - h * h * prob.p(y)


def jacobian_dn(prob: BvpProblem, y) -> Tridiagonal:
    y = _values(y)
    N = y.shape[-1]
    h = (prob.b - prob.a) / (N + 1)
    off = np.ones(y.shape[:-1] + (N - 1,), dtype=complex)
    diag = -2.0 - h * h * prob.dp(y)
    return Tridiagonal(off, np.asarray(diag, dtype=complex), off.copy())


def max_error_vs_exact(prob: BvpProblem, y) -> float:
    if prob.exact_solution is None:
        raise MissingExactSolution(f"problem {prob.name!r} has no closed-form solution")
    v = _values(y)
    x = prob.mesh(v.size).interior
    return float(np.max(np.abs(v.real - prob.exact_solution(x))))


# ---------------------------------------------------------------------------
# presets

def _bvp2_exact(x):
    return 1.0 / (np.asarray(x) + 2.0)


def bvp2(lam: float | None = None) -> BvpProblem:
    """``y'' = 2 y^3``, ``y(0) = 1/2``, ``y(1) = 1/3``; exact solution ``1/(x+2)``."""
    if lam is not None:
        raise ValueError("bvp2 takes no lambda")
    return BvpProblem(0.0, 1.0, 0.5, 1.0 / 3.0, Polynomial([0, 0, 0, 2]), "bvp2",
                      exact_solution=_bvp2_exact)


def bvp3(lam: float) -> BvpProblem:
    """``y'' = -lam (1 + y^2)`` with zero boundary values."""
    return BvpProblem(0.0, 1.0, 0.0, 0.0, Polynomial([-lam, 0, -lam]), f"bvp3(lambda={lam:g})")


def bvp4(lam: float) -> BvpProblem:
    """``y'' = -lam y^3`` with zero boundary values."""
    return BvpProblem(0.0, 1.0, 0.0, 0.0, Polynomial([0, 0, 0, -lam]), f"bvp4(lambda={lam:g})")


def duffing3(lam: float) -> BvpProblem:
    """Two-term Taylor truncation of ``y'' = -lam sin(y)``."""
    return BvpProblem(0.0, 1.0, 0.0, 0.0, Polynomial([0, -lam, 0, lam / 6.0]), f"duffing3(lambda={lam:g})")


def duffing5(lam: float) -> BvpProblem:
    """Three-term Taylor truncation of ``y'' = -lam sin(y)``."""
    return BvpProblem(0.0, 1.0, 0.0, 0.0, Polynomial([0, -lam, 0, lam / 6.0, 0, -lam / 120.0]),
                      f"duffing5(lambda={lam:g})")


def bratu2(lam: float) -> BvpProblem:
    """Quadratic truncation of the Bratu problem ``y'' = -lam exp(y)``."""
    return BvpProblem(0.0, 1.0, 0.0, 0.0, Polynomial([-lam, -lam, -lam / 2.0]), f"bratu2(lambda={lam:g})")


PRESETS: dict[str, Callable[..., BvpProblem]] = {
    "bvp2": bvp2,
    "bvp3": bvp3,
    "bvp4": bvp4,
    "duffing3": duffing3,
    "duffing5": duffing5,
    "bratu2": bratu2,
}


def get_preset(name: str, lam: float | None = None) -> BvpProblem:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if name == "bvp2":
        return factory(lam)
    if lam is None:
        raise ValueError(f"preset {name!r} needs a lambda")
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"preset {name!r} needs lambda > 0, got {lam}")
    return factory(lam)
