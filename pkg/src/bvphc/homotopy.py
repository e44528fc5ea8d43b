"""Mesh-refinement homotopy taking D_N (plus one free node) at t=1 to D_{N+1} at t=0.

With Gamma(t) = g^2 t + (1 - t), h(t) = g t h0 + (1 - t) h1 and
Y(t) = (1 - t) y[N+1] + g^2 beta t, the rows are

    i < N    Gamma (y[i-1] - 2 y[i] + y[i+1])        - h(t)^2 p(y[i])
    i = N    Gamma (y[N-1] - 2 y[N]) + Y(t)          - h(t)^2 p(y[N])
    i = N+1  Gamma (y[N] - 2 y[N+1] + beta)          - h(t)^2 p(y[N+1])

(1-based, y[0] = alpha). ``t`` may be a scalar or an array matching the batch
shape of ``y``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .linalg import Tridiagonal
from .poly import Polynomial
from .problem import BvpProblem


class DegenerateStart(ValueError):
    pass


GAMMA_ARC = math.pi / 4


def sample_gamma(rng: np.random.Generator, arc: float = GAMMA_ARC) -> complex:
    """Unit-modulus gamma with ``|arg gamma| < arc``, excluding gamma = 1.

    Keeping the argument inside +-pi/4 holds ``Gamma(t)`` (the segment from 1
    to gamma^2) at least cos(arc) away from zero and keeps ``h(t)`` away from
    zero as well; ``arc = pi`` samples the whole circle.
    """
    if not 0 < arc <= math.pi:
        raise ValueError("arc must lie in (0, pi]")
    while True:
        theta = arc * (2.0 * rng.random() - 1.0)
        g = cmath.exp(1j * theta)
        if min(abs(g - 1), abs(g + 1)) > 1e-3:
            return g


def stage_gamma(seed: int, N: int, arc: float = GAMMA_ARC) -> complex:
    # independent stream per (seed, stage) so gamma does not depend on filters upstream
    return sample_gamma(np.random.default_rng([seed, N]), arc)


@dataclass(frozen=True)
class HomotopyStage:
    prob: BvpProblem
    N: int
    gamma: complex

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("stage needs N >= 1")
        if abs(abs(self.gamma) - 1.0) > 1e-12:
            raise ValueError(f"|gamma| must be 1, got {abs(self.gamma)}")

    @property
    def h0(self) -> float:
        return (self.prob.b - self.prob.a) / (self.N + 1)

    @property
    def h1(self) -> float:
        return (self.prob.b - self.prob.a) / (self.N + 2)

    @property
    def n_unknowns(self) -> int:
        return self.N + 1

    def Gamma(self, t):
        return self.gamma**2 * t + (1 - t)

    def h(self, t):
        return self.gamma * t * self.h0 + (1 - t) * self.h1

    def Y_next(self, y_last, t):
        return (1 - t) * y_last + self.gamma**2 * self.prob.beta * t

    def nodes(self, t) -> np.ndarray:
        """Moving mesh ``x_i(t)``, i = 1..N+1 (unused by p(y) problems)."""
        return self.prob.a + np.arange(1, self.N + 2) * self.h(t)

    def _prep(self, y, t):
        y = np.asarray(y, dtype=complex)
        if y.shape[-1] != self.N + 1:
            raise ValueError(f"expected {self.N + 1} unknowns, got {y.shape[-1]}")
        t = np.asarray(t, dtype=float)
        return y, t

    def _stencil(self, y):
        """Second differences, using ``beta`` as the right neighbour of the
        last node and leaving the row-N coupling to the caller."""
        alpha, beta = self.prob.alpha, self.prob.beta
        lead = np.full(y.shape[:-1] + (1,), alpha, dtype=complex)
        left = np.concatenate([lead, y[..., :-1]], axis=-1)
        right = np.concatenate([y[..., 1:], np.full(y.shape[:-1] + (1,), beta, dtype=complex)], axis=-1)
        s = left - 2.0 * y + right
        # row N excludes y[N+1]; Y(t) is added separately
        s[..., -2] -= y[..., -1]
        return s

    def eval_H(self, y, t) -> np.ndarray:
        y, t = self._prep(y, t)
        G = self.Gamma(t)[..., None]
        hh = (self.h(t) ** 2)[..., None]
        out = G * self._stencil(y) - hh * self.prob.p(y)
        out[..., -2] += self.Y_next(y[..., -1], t)
        return out

    def jacobian_H_y(self, y, t) -> Tridiagonal:
        y, t = self._prep(y, t)
        n = self.N + 1
        G = self.Gamma(t)
        hh = self.h(t) ** 2
        batch = y.shape[:-1]
        diag = -2.0 * G[..., None] - hh[..., None] * self.prob.dp(y)
        lower = np.broadcast_to(G[..., None], batch + (n - 1,)).astype(complex)
        upper = lower.copy()
        upper[..., -1] = np.broadcast_to(1 - t, batch)
        return Tridiagonal(lower, np.asarray(diag, dtype=complex), upper)

    def dH_dt(self, y, t) -> np.ndarray:
        y, t = self._prep(y, t)
        g2 = self.gamma**2
        dG = g2 - 1.0
        dhh = 2.0 * self.h(t) * (self.gamma * self.h0 - self.h1)
        out = dG * self._stencil(y) - np.asarray(dhh)[..., None] * self.prob.p(y)
        out[..., -2] += -y[..., -1] + g2 * self.prob.beta
        return out

    def start_polynomial(self, y_prev_last) -> Polynomial:
        """Polynomial in the new node's value at t = 1:
        ``(y_N + beta) - 2 z - h0^2 p(z)``."""
        c = -(self.h0**2) * self.prob.p.coeffs.astype(complex)
        c[0] += complex(y_prev_last) + self.prob.beta
        if c.size > 1:
            c[1] -= 2.0
        if not abs(c[-1]) > np.finfo(float).tiny:
            raise DegenerateStart("leading coefficient of the start polynomial vanished")
        return Polynomial(c)
