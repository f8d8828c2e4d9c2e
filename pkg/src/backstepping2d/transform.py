"""Column-wise Volterra transform ``w = v - int_0^y K(y, xi) v(x, xi) dxi``.

Every column uses the same trapezoid matrix built from the kernel table, so
the forward map is ``w = (I - Q) v`` per column with ``Q`` lower triangular
and the inverse is exact forward substitution with the same weights.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .diagnostics import l2_norm
from .errors import SingularTransformError, UsageError
from .field import Field
from .kernel import KernelTable

PIVOT_MIN = 1e-8


def _check(v: Field, kt: KernelTable):
    if kt.n != v.grid.n:
        raise UsageError(f"kernel table n={kt.n} does not match grid n={v.grid.n}")


def forward_transform(v: Field, kt: KernelTable) -> Field:
    _check(v, kt)
    q = kt.quadrature_matrix()
    w = v.values - v.values @ q.T
    return Field(v.grid, np.where(v.grid.inside, w, 0.0))


def inverse_transform(w: Field, kt: KernelTable) -> Field:
    """Solve ``v_j - sum_{k<=j} Q_jk v_k = w_j`` row by row, all columns at
    once."""
    _check(w, kt)
    q = kt.quadrature_matrix()
    pivots = 1.0 - np.diag(q)
    bad = np.flatnonzero(np.abs(pivots) < PIVOT_MIN)
    if bad.size:
        raise SingularTransformError(
            f"Volterra pivot 1 - h K(y,y)/2 vanishes at row {int(bad[0])} "
            f"(lambda={kt.lam:g}, h={kt.h:g})")
    rhs = np.where(w.grid.inside, w.values, 0.0)
    v = np.zeros_like(rhs)
    for j in range(kt.n):
        v[:, j] = (rhs[:, j] + v[:, :j] @ q[j, :j]) / pivots[j]
    return Field(w.grid, np.where(w.grid.inside, v, 0.0))


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    lap = np.zeros_like(values)
    lap[1:-1, 1:-1] = (values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:]
                       + values[1:-1, :-2] - 4.0 * values[1:-1, 1:-1]) / h ** 2
    return lap


class TargetResidual:
    """Streaming evaluation of the target-system residuals.

    Feed equally spaced snapshots of ``v`` with :meth:`add`; the interior
    residual of ``w_t = w_xx + w_yy`` uses a centred difference in time over
    consecutive triples, the boundary residual is ``max |w|`` on boundary
    nodes over every snapshot.
    """

    def __init__(self, kt: KernelTable, spacing_rtol: float = 1e-6):
        self.kt = kt
        self.spacing_rtol = spacing_rtol
        self.count = 0
        self.interior = 0.0
        self.boundary = 0.0
        self._window: list[tuple[float, np.ndarray]] = []
        self._dt = None

    def add(self, t: float, v: Field) -> None:
        grid = v.grid
        w = forward_transform(v, self.kt).values
        self.boundary = max(self.boundary, float(np.max(np.abs(w[grid.boundary]),
                                                        initial=0.0)))
        if self._window:
            gap = t - self._window[-1][0]
            if self._dt is None:
                self._dt = gap
            elif abs(gap - self._dt) > self.spacing_rtol * self._dt:
                raise UsageError(
                    f"snapshots must be equally spaced (gap {gap:.6g} vs "
                    f"{self._dt:.6g})")
        self._window.append((t, w))
        self.count += 1
        if len(self._window) == 3:
            (_, w0), (_, w1), (_, w2) = self._window
            wt = (w2 - w0) / (2.0 * self._dt)
            res = np.abs(wt - laplacian(w1, grid.h))[grid.deep_interior]
            self.interior = max(self.interior, float(np.max(res, initial=0.0)))
            self._window.pop(0)

    def result(self) -> tuple[float, float]:
        if self.count < 3:
            raise UsageError(
                f"target residual needs at least 3 snapshots, got {self.count}")
        return self.interior, self.boundary


def target_residual(snapshots: Iterable[tuple[float, Field]],
                    kt: KernelTable) -> tuple[float, float]:
    """``(interior_residual, boundary_residual)`` of the transformed states.

    ``snapshots`` is a sequence of ``(t, v)`` pairs at equally spaced times.
    """
    acc = TargetResidual(kt)
    for t, v in snapshots:
        acc.add(t, v)
    return acc.result()


def transformed_norms(snapshots: Sequence[Field], kt: KernelTable) -> np.ndarray:
    return np.array([l2_norm(forward_transform(v, kt)) for v in snapshots])
