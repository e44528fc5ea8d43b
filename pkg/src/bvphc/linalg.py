"""Batched complex tridiagonal solves.

Arrays carry a leading batch axis: ``diag`` has shape ``(..., n)`` and the
off-diagonals ``(..., n - 1)``. Row ``i`` of the system reads
``lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

PIVOT_TOL = 1e-13


class Tridiagonal(NamedTuple):
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.shape[-1]

    def to_dense(self) -> np.ndarray:
        n = self.n
        out = np.zeros(self.diag.shape + (n,), dtype=np.result_type(self.diag, self.lower, self.upper))
        idx = np.arange(n)
        out[..., idx, idx] = self.diag
        if n > 1:
            out[..., idx[1:], idx[:-1]] = self.lower
            out[..., idx[:-1], idx[1:]] = self.upper
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        if self.n > 1:
            y[..., 1:] += self.lower * x[..., :-1]
            y[..., :-1] += self.upper * x[..., 1:]
        return y


def solve_tridiagonal(T: Tridiagonal, rhs: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Solve ``T x = rhs`` for every batch entry.

    Thomas elimination without pivoting; batch entries whose pivots collapse
    below ``pivot_tol`` relative to their row are re-solved densely with
    partial pivoting. Entries that are exactly singular come back as NaN.
    """
    lower, diag, upper = (np.asarray(a, dtype=complex) for a in T)
    rhs = np.asarray(rhs, dtype=complex)
    shape = np.broadcast_shapes(diag.shape, rhs.shape)
    diag = np.broadcast_to(diag, shape)
    rhs = np.broadcast_to(rhs, shape)
    n = shape[-1]
    lower = np.broadcast_to(lower, shape[:-1] + (n - 1,))
    upper = np.broadcast_to(upper, shape[:-1] + (n - 1,))

    cp = np.empty(shape[:-1] + (max(n - 1, 0),), dtype=complex)
    dp = np.empty(shape, dtype=complex)
    bad = np.zeros(shape[:-1], dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        piv = diag[..., 0]
        bad |= np.abs(piv) <= pivot_tol * (np.abs(diag[..., 0]) + (np.abs(upper[..., 0]) if n > 1 else 0.0))
        if n > 1:
            cp[..., 0] = upper[..., 0] / piv
        dp[..., 0] = rhs[..., 0] / piv
        for i in range(1, n):
            piv = diag[..., i] - lower[..., i - 1] * cp[..., i - 1]
            row = np.abs(diag[..., i]) + np.abs(lower[..., i - 1])
            if i < n - 1:
                row = row + np.abs(upper[..., i])
                cp[..., i] = upper[..., i] / piv
            bad |= ~(np.abs(piv) > pivot_tol * row)
            dp[..., i] = (rhs[..., i] - lower[..., i - 1] * dp[..., i - 1]) / piv
        x = dp
        for i in range(n - 2, -1, -1):
            x[..., i] = dp[..., i] - cp[..., i] * x[..., i + 1]

    if np.any(bad):
        dense = Tridiagonal(lower, diag, upper).to_dense()[bad]
        b = rhs[bad]
        sol = np.empty_like(b)
        for k in range(b.shape[0]):
            try:
                sol[k] = np.linalg.solve(dense[k], b[k])
            except np.linalg.LinAlgError:
                sol[k] = np.nan
        x[bad] = sol
    return x


def condition_number(T: Tridiagonal) -> np.ndarray:
    """2-norm condition number per batch entry (inf when singular)."""
    dense = T.to_dense()
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.linalg.svd(dense, compute_uv=False)
        cond = s[..., 0] / s[..., -1]
    return np.where(np.isfinite(cond), cond, np.inf)
