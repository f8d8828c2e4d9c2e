"""Norms, exponential-rate fits, and the principal Dirichlet eigenvalue."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, UsageError
from .field import Field
from .geometry import Grid

NORM_FLOOR = 1e-30


def l2_norm(v: Field) -> float:
    """Trapezoid-rule L2 norm over the masked domain."""
    g = v.grid
    w = g.trapezoid_weights()
    return float(np.sqrt(g.h ** 2 * np.sum(w * v.values ** 2)))


@dataclass(frozen=True)
class NormSeries:
    times: np.ndarray
    norms: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.norms, dtype=float)
        if t.shape != y.shape or t.ndim != 1:
            raise UsageError("times and norms must be 1D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise UsageError("times must be strictly increasing")
        if np.any(y < 0):
            raise UsageError("norms must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "norms", y)


class DecayFit(NamedTuple):
    rate: float
    r_squared: float
    floor_hit: bool = False


def fit_decay_rate(s: NormSeries, window: float = 0.5,
                   min_samples: int = 10) -> DecayFit:
    """Fit ``norm ~ exp(-rate t)`` on the trailing ``window`` of the series.

    Positive ``rate`` means decay. Samples at or below ``NORM_FLOOR`` are
    dropped and reported through ``floor_hit``.
    """
    if not 0.0 < window <= 1.0:
        raise UsageError(f"window must be in (0, 1], got {window}")
    t, y = s.times, s.norms
    if t.size == 0:
        raise UsageError("empty norm series")
    start = t[0] + (1.0 - window) * (t[-1] - t[0])
    sel = t >= start - 1e-12 * max(1.0, abs(start))
    t, y = t[sel], y[sel]
    keep = y > NORM_FLOOR
    floor_hit = not bool(np.all(keep))
    t, y = t[keep], y[keep]
    if t.size < min_samples:
        raise UsageError(
            f"decay fit needs {min_samples} samples above {NORM_FLOOR:g} in "
            f"the window, got {t.size}")
    logy = np.log(y)
    tc = t - t.mean()
    slope = float(np.dot(tc, logy - logy.mean()) / np.dot(tc, tc))
    fitted = logy.mean() + slope * tc
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return DecayFit(rate=-slope, r_squared=r2, floor_hit=floor_hit)


def dirichlet_laplacian(grid: Grid) -> tuple[sp.csr_matrix, np.ndarray]:
    """Matrix of ``-Delta_h`` on interior nodes with zero boundary data.

    Returns the matrix and the flat node indices of its unknowns.
    """
    n, h = grid.n, grid.h
    interior = grid.interior.ravel()
    nodes = np.flatnonzero(interior)
    number = np.full(n * n, -1)
    number[nodes] = np.arange(nodes.size)
    rows = [np.arange(nodes.size)]
    cols = [np.arange(nodes.size)]
    vals = [np.full(nodes.size, 4.0 / h ** 2)]
    i, j = np.divmod(nodes, n)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = i + di, j + dj
        ok = (ni >= 0) & (ni < n) & (nj >= 0) & (nj < n)
        nb = np.full(nodes.size, -1)
        nb[ok] = number[ni[ok] * n + nj[ok]]
        ok = nb >= 0
        rows.append(np.flatnonzero(ok))
        cols.append(nb[ok])
        vals.append(np.full(int(ok.sum()), -1.0 / h ** 2))
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nodes.size, nodes.size))
    return A, nodes


class EigenResult(NamedTuple):
    value: float
    vector: np.ndarray
    iterations: int


def principal_eigenpair(grid: Grid, rtol: float = 1e-8,
                        max_iter: int = 10_000) -> EigenResult:
    """Smallest eigenpair of ``-Delta_h`` by inverse power iteration.

    The eigenvector is returned as an ``n x n`` nodal array, zero off the
    interior, normalised to unit max-norm and positive.
    """
    A, nodes = dirichlet_laplacian(grid)
    if nodes.size == 0:
        raise UsageError("grid has no interior nodes")
    solve = spla.splu(A.tocsc()).solve
    x = np.ones(nodes.size) / np.sqrt(nodes.size)
    value = float(x @ (A @ x))
    for it in range(1, max_iter + 1):
        y = solve(x)
        x = y / np.linalg.norm(y)
        new = float(x @ (A @ x))
        if abs(new - value) < rtol * abs(new):
            value = new
            break
        value = new
    else:
        raise ConvergenceError(
            f"inverse iteration did not converge in {max_iter} steps",
            residual=abs(new - value), iterations=max_iter)
    vec = np.zeros(grid.n * grid.n)
    vec[nodes] = x * np.sign(x.sum())
    vec = vec.reshape(grid.n, grid.n)
    return EigenResult(value, vec / np.max(np.abs(vec)), it)


def principal_eigenvalue(grid: Grid) -> float:
    return principal_eigenpair(grid).value
