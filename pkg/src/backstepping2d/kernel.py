"""Backstepping kernel on the triangle ``0 <= xi <= y <= 1``.

The kernel solves the Goursat problem

    K_yy - K_xixi - lam K = 0,   K(y, y) = -lam y / 2,   K(y, 0) = 0,

whose solution is ``-lam xi I1(s)/s`` with ``s = sqrt(lam (y^2 - xi^2))``.
Here ``I1(s)/s`` is summed as an entire series in ``z = s^2`` so that the
diagonal ``z = 0`` and negative ``lam`` need no special cases.

:func:`solve_kernel_goursat` is an independent route that never touches the
series; it iterates the integral form of the problem in characteristic
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 60


def _bessel_ratio_series(z):
    """Sum ``sum_m (z/4)^m / (m! (m+1)!)``, i.e. ``2 I1(sqrt z)/sqrt z``."""
    z = np.asarray(z, dtype=float)
    q = z / 4.0
    term = np.ones_like(z)
    total = term.copy()
    for m in range(1, SERIES_MAX_TERMS):
        term = term * q / (m * (m + 1))
        total = total + term
        if np.all(np.abs(term) < SERIES_RTOL * (1.0 + np.abs(total))):
            # stop once the term just added is below tolerance everywhere;
            # the term after it is smaller still
            break
    return total


def series_terms(z: float, count: int = SERIES_MAX_TERMS) -> np.ndarray:
    """First ``count`` terms ``(z/4)^m / (m!(m+1)!)`` of the kernel series."""
    terms = np.empty(count)
    terms[0] = 1.0
    for m in range(1, count):
        terms[m] = terms[m - 1] * (z / 4.0) / (m * (m + 1))
    return terms


def _check_triangle(y, xi):
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0.0) or np.any(xi > y) or np.any(y > 1.0):
        raise DomainError(
            f"kernel is defined on 0 <= xi <= y <= 1, got y={y!r}, xi={xi!r}")
    return y, xi


def eval_kernel(lam: float, y, xi):
    """Closed-form kernel ``K(y, xi)`` for reaction coefficient ``lam``.

    Accepts scalars or broadcastable arrays. For ``lam < 0`` the series
    alternates and the absolute rounding error grows like machine epsilon
    times the value of the series at ``|z|``.
    """
    y, xi = _check_triangle(y, xi)
    lam = float(lam)
    z = lam * (y * y - xi * xi)
    out = -0.5 * lam * xi * _bessel_ratio_series(z)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Samples ``values[j, k] = K(y_j, xi_k)`` for ``k <= j``.

    Entries above the diagonal are zero and carry no meaning.
    """

    lam: float
    n: int
    values: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def lower(self) -> np.ndarray:
        """Boolean mask of the stored lower triangle, diagonal included."""
        return np.tri(self.n, dtype=bool)

    def quadrature_matrix(self) -> np.ndarray:
        """``Q[j, k] = h c_k K_jk`` with ``c`` the trapezoid weights on
        ``[0, y_j]``; row ``j`` integrates ``K(y_j, .) f`` for a column
        vector ``f``."""
        q = self.h * np.tril(self.values)
        q[:, 0] *= 0.5
        idx = np.arange(self.n)
        q[idx, idx] *= 0.5
        q[0, 0] = 0.0
        return q

    def boundary_errors(self) -> tuple[float, float]:
        """Max deviation from ``K(y, y) = -lam y/2`` and from ``K(y, 0) = 0``."""
        y = self.nodes
        diag = np.max(np.abs(np.diag(self.values) + 0.5 * self.lam * y))
        edge = np.max(np.abs(self.values[:, 0]))
        return float(diag), float(edge)


def build_kernel_table(lam: float, n: int) -> KernelTable:
    """Evaluate the closed form on every lattice pair ``xi_k <= y_j``."""
    n = int(n)
    if n < 2:
        raise DomainError(f"kernel table needs n >= 2, got {n}")
    nodes = np.linspace(0.0, 1.0, n)
    y = nodes[:, None]
    xi = nodes[None, :]
    lower = np.tri(n, dtype=bool)
    yy = np.where(lower, y, 0.0)
    xx = np.where(lower, xi, 0.0)
    values = np.where(lower, eval_kernel(lam, yy, xx), 0.0)
    values.flags.writeable = False
    return KernelTable(lam=float(lam), n=n, values=values)


def solve_kernel_goursat(lam: float, n: int, tol: float = 1e-12,
                         max_iter: int = 200) -> KernelTable:
    """Solve the kernel equations by successive approximation.

    With ``s = y + xi``, ``t = y - xi`` and ``G(s, t) = K(y, xi)`` the
    problem becomes ``G_st = lam G / 4`` with ``G(s, 0) = -lam s/4`` and
    ``G(t, t) = 0``, equivalent to

        G(s, t) = -lam (s - t)/4 + lam/4 * int_t^s int_0^t G(a, b) db da.

    The double integral is taken with the trapezoid rule on a lattice of
    spacing ``h = 1/(n-1)`` in both variables, and the map is iterated from
    the boundary term until the update drops below ``tol`` (relative to
    ``max |G|`` once that exceeds one).
    """
    n = int(n)
    if n < 2:
        raise DomainError(f"Goursat solver needs n >= 2, got {n}")
    lam = float(lam)
    h = 1.0 / (n - 1)
    size = 2 * (n - 1) + 1
    p = np.arange(size)[:, None]   # s index
    q = np.arange(size)[None, :]   # t index
    region = (q <= p) & (p + q <= size - 1)

    g0 = np.where(region, -0.25 * lam * (p - q) * h, 0.0)
    g = g0.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        new = g0 + 0.25 * lam * _char_double_integral(g, region, h)
        residual = float(np.max(np.abs(new - g)))
        g = new
        if residual <= tol * max(1.0, float(np.max(np.abs(g)))):
            break
    else:
        raise ConvergenceError(
            f"Goursat iteration did not reach {tol:g} in {max_iter} sweeps "
            f"(last update {residual:.3e})", residual=residual,
            iterations=max_iter)

    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    lower = k <= j
    values = np.where(lower, g[np.where(lower, j + k, 0),
                               np.where(lower, j - k, 0)], 0.0)
    values.flags.writeable = False
    return KernelTable(lam=lam, n=n, values=values)


def _char_double_integral(g, region, h):
    """``I[p, q] = int_{t_q}^{s_p} int_0^{t_q} g(a, b) db da`` by trapezoids.

    The inner integral runs along the second axis from 0 to column ``q``; the
    outer along the first axis from row ``q`` to row ``p``.
    """
    # inner[a, q] = trapezoid of g[a, 0..q]
    cum = np.cumsum(g, axis=1)
    inner = h * (cum - 0.5 * g[:, :1] - 0.5 * g)
    inner[:, 0] = 0.0
    inner = np.where(region, inner, 0.0)
    # outer over a in [q, p]; inner vanishes for a < q
    cum = np.cumsum(inner, axis=0)
    diag = np.diagonal(inner)[None, :]
    out = h * (cum - 0.5 * diag - 0.5 * inner)
    return np.where(region, out, 0.0)


def kernel_pde_residual(t: KernelTable) -> float:
    """Max of ``|D2_y K - D2_xi K - lam K|`` over interior triangle nodes.

    Nodes used are ``1 <= k < j <= n-2``; the first off-diagonal is included
    so the check is sensitive to the diagonal data.
    """
    K = np.asarray(t.values)
    n = t.n
    if n < 4:
        return 0.0
    h2 = t.h ** 2
    j = np.arange(1, n - 1)[:, None]
    k = np.arange(1, n - 1)[None, :]
    sel = k < j
    jj, kk = np.broadcast_arrays(j, k)
    jj, kk = jj[sel], kk[sel]
    if jj.size == 0:
        return 0.0
    d2y = (K[jj + 1, kk] - 2.0 * K[jj, kk] + K[jj - 1, kk]) / h2
    d2xi = (K[jj, kk + 1] - 2.0 * K[jj, kk] + K[jj, kk - 1]) / h2
    res = d2y - d2xi - t.lam * K[jj, kk]
    return float(np.max(np.abs(res)))
