"""Univariate polynomials evaluated over the complex numbers.

Coefficients are stored in ascending order, ``c[0] + c[1] z + ... + c[d] z^d``.
Evaluation broadcasts over numpy arrays so the same object serves scalar
residuals and batched path tracking.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

TOL_ROOT = 1e-12
MAX_SWEEPS = 200


class NonConvergence(RuntimeError):
    """Raised when the simultaneous root iteration misses its tolerance."""


@dataclass(frozen=True, eq=False)
class Polynomial:
    coeffs: np.ndarray

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.iscomplexobj(c):
            c = c.astype(float)
        # strip trailing zeros but keep at least the constant term
        nz = np.flatnonzero(c)
        last = int(nz[-1]) if nz.size else 0
        c = c[: last + 1].copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs)

    def __call__(self, z):
        return evaluate(self, z)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


def evaluate(p: Polynomial, z):
    """Horner evaluation of ``p`` at ``z`` (scalar or array)."""
    c = p.coeffs
    if np.isscalar(z):
        acc = c[-1]
        for ck in c[-2::-1]:
            acc = acc * z + ck
        return acc
    z = np.asarray(z)
    acc = np.full(z.shape, c[-1], dtype=np.result_type(c, z, complex))
    for ck in c[-2::-1]:
        acc = acc * z + ck
    return acc


def derivative(p: Polynomial) -> Polynomial:
    if p.degree == 0:
        return Polynomial([0.0])
    k = np.arange(1, p.degree + 1)
    return Polynomial(k * p.coeffs[1:])


def _root_radius(monic: np.ndarray) -> float:
    # Fujiwara bound on root moduli of a monic polynomial
    d = monic.size - 1
    tail = np.abs(monic[:-1])
    terms = [tail[d - k] ** (1.0 / k) for k in range(1, d + 1)]
    terms[-1] = (tail[0] / 2.0) ** (1.0 / d)
    return max(2.0 * max(terms), 1e-300)


def all_roots(p: Polynomial, tol: float = TOL_ROOT, max_sweeps: int = MAX_SWEEPS) -> list[complex]:
    """All ``d`` complex roots of ``p`` by Aberth-Ehrlich iteration.

    Roots are counted with multiplicity and returned sorted by real part,
    then imaginary part. A root is frozen when ``|p(z)|`` reaches the rounding
    floor of the Horner sum or its correction is negligible. If the sweep cap
    is hit first, the roots are still accepted when every residual satisfies
    ``|p(z)| <= tol * (1 + max|c_k|)`` or sits within a small multiple of its
    rounding floor.
    """
    d = p.degree
    if d < 1:
        raise ValueError("root finding needs degree >= 1")
    c = [complex(v) for v in p.coeffs]
    if d == 1:
        return [-c[0] / c[1]]

    lead = c[-1]
    monic = np.array([v / lead for v in c])
    absc = [abs(v) for v in c]
    scale = 1.0 + max(absc)
    radius = _root_radius(monic)
    # rotate the start circle off the real axis to avoid symmetric stalls
    z = [radius * 0.5 * cmath.exp(1j * (2.0 * math.pi * k / d + 0.4)) for k in range(d)]
    done = [False] * d
    resid = [math.inf] * d
    floor = [0.0] * d
    eps = np.finfo(float).eps

    for _ in range(max_sweeps):
        for k in range(d):
            if done[k]:
                continue
            zk = z[k]
            # Horner for p, p' and the rounding bound simultaneously
            val = c[-1]
            dval = 0j
            bound = absc[-1]
            azk = abs(zk)
            for j in range(d - 1, -1, -1):
                dval = dval * zk + val
                val = val * zk + c[j]
                bound = bound * azk + absc[j]
            resid[k] = abs(val)
            floor[k] = 4.0 * eps * bound
            if abs(val) <= 4.0 * eps * bound:
                done[k] = True
                continue
            if dval == 0:
                z[k] = zk + radius * 1e-3 * (1 + 1j)
                continue
            ratio = val / dval
            repel = 0j
            for j in range(d):
                if j != k:
                    diff = zk - z[j]
                    if diff != 0:
                        repel += 1.0 / diff
            denom = 1.0 - ratio * repel
            step = ratio / denom if denom != 0 else ratio
            size = abs(step)
            if size <= 4.0 * eps * azk:
                done[k] = True
                continue
            z[k] = zk - step
        if all(done):
            break
    else:
        if not all(r <= max(tol * scale, 16.0 * f) for r, f in zip(resid, floor)):
            raise NonConvergence(f"Aberth iteration did not converge in {max_sweeps} sweeps for {p!r}")
    return sorted(z, key=lambda w: (w.real, w.imag))
