"""Explicit time stepping of ``v_t = v_xx + v_yy + lam v`` with boundary
feedback.

Homogeneous Dirichlet data holds on the floor and the two side walls. On the
graph (and on staircase risers) each node is driven by the feedback

    U(x_i, y_j) = int_0^{y_j} K(y_j, xi) v(x_i, xi) dxi,

which at the graph node ``j = j_top(i)`` is the full-column integral. One
formula covers both the full-height tail and the lower part of the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .diagnostics import DecayFit, NormSeries, fit_decay_rate, l2_norm
from .errors import ConfigError, DivergenceError, UsageError
from .field import Field
from .geometry import BoundaryGraph, Grid, build_grid, piano_default
from .kernel import KernelTable, build_kernel_table
from .transform import forward_transform

LAMBDA_MAX = 200.0
INITIAL_KINDS = ("bump", "product_sine", "random_seeded")


def dt_max(n: int, lam: float) -> float:
    """Largest stable forward-Euler step, ``h^2 / (4 + |lam| h^2)``."""
    h2 = (1.0 / (n - 1)) ** 2
    return h2 / (4.0 + abs(lam) * h2)


@dataclass(frozen=True)
class SimConfig:
    """Scenario parameters.

    ``dt=None`` picks ``cfl_fraction * dt_max``. A larger explicit ``dt`` is
    rejected, never clamped.
    """

    lam: float
    n: int = 81
    dt: Optional[float] = None
    t_final: float = 0.5
    control_enabled: bool = True
    initial_condition: str = "bump"
    seed: int = 7
    snapshot_every: int = 100
    graph: BoundaryGraph = field(default_factory=piano_default)
    cfl_fraction: float = 0.9
    divergence_factor: float = 1e8

    def __post_init__(self):
        if not math.isfinite(self.lam) or abs(self.lam) > LAMBDA_MAX:
            raise ConfigError(
                f"|lambda| must be at most {LAMBDA_MAX:g}, got {self.lam}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigError(f"n must be an integer >= 3, got {self.n}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if int(self.snapshot_every) != self.snapshot_every or self.snapshot_every < 1:
            raise ConfigError(
                f"snapshot_every must be an integer >= 1, got {self.snapshot_every}")
        if self.initial_condition not in INITIAL_KINDS:
            raise ConfigError(
                f"unknown initial condition {self.initial_condition!r}; "
                f"expected one of {', '.join(INITIAL_KINDS)}")
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ConfigError(
                f"cfl_fraction must be in (0, 1], got {self.cfl_fraction}")
        if not self.divergence_factor > 1.0:
            raise ConfigError("divergence_factor must exceed 1")
        bound = dt_max(self.n, self.lam)
        if self.dt is None:
            object.__setattr__(self, "dt", self.cfl_fraction * bound)
        elif not 0.0 < self.dt <= bound:
            raise ConfigError(
                f"dt = {self.dt:.6g} violates the explicit stability bound "
                f"dt <= h^2/(4 + |lambda| h^2) = {bound:.6g} "
                f"(n = {self.n}, lambda = {self.lam:g})")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_final / self.dt - 1e-9))

    def with_(self, **changes) -> "SimConfig":
        """Copy with changes; ``dt`` is re-derived unless given."""
        changes.setdefault("dt", None)
        return replace(self, **changes)


# -- initial conditions -------------------------------------------------------

def initial_condition(kind: str, grid: Grid, seed: int = 7) -> Field:
    """Initial state vanishing on every boundary node."""
    x = grid.coords[:, None]
    y = grid.coords[None, :]
    if kind == "bump":
        values = _bump(grid, x, y)
    elif kind == "product_sine":
        ymax = grid.graph.min_height
        # confined to the strip under the lowest point of the graph
        values = np.sin(np.pi * x) * np.where(y <= ymax, np.sin(np.pi * y / ymax), 0.0)
    elif kind == "random_seeded":
        rng = np.random.default_rng(seed)
        values = rng.uniform(-1.0, 1.0, size=(grid.n, grid.n))
    else:
        raise ConfigError(
            f"unknown initial condition {kind!r}; expected one of "
            f"{', '.join(INITIAL_KINDS)}")
    return Field(grid, np.where(grid.interior, values, 0.0))


def _bump(grid: Grid, x, y):
    w = grid.trapezoid_weights()
    X, Y = np.broadcast_arrays(x, y)
    cx = float(np.sum(w * X) / np.sum(w))
    cy = float(np.sum(w * Y) / np.sum(w))
    outside = ~grid.interior
    dist_out = np.hypot(X - cx, Y - cy)[outside]
    ii = np.clip(int(round(cx / grid.h)), 0, grid.n - 1)
    jj = np.clip(int(round(cy / grid.h)), 0, grid.n - 1)
    if not grid.interior[ii, jj]:
        # centroid outside the staircase: fall back to the deepest node
        depth = np.full(grid.mask.shape, -np.inf)
        pts = np.argwhere(outside)
        for a, b in np.argwhere(grid.interior):
            depth[a, b] = np.min(np.hypot(pts[:, 0] - a, pts[:, 1] - b))
        ii, jj = np.unravel_index(np.argmax(depth), depth.shape)
        cx, cy = ii * grid.h, jj * grid.h
        dist_out = np.hypot(X - cx, Y - cy)[outside]
    radius = 0.9 * float(np.min(dist_out))
    r2 = ((X - cx) ** 2 + (Y - cy) ** 2) / radius ** 2
    with np.errstate(divide="ignore", over="ignore"):
        b = np.where(r2 < 1.0, np.exp(1.0 - 1.0 / (1.0 - np.minimum(r2, 0.999999999))), 0.0)
    return b


# -- feedback ------------------------------------------------------------------

def control_trace(v: Field, kt: KernelTable, column: int,
                  row: Optional[int] = None) -> float:
    """Trapezoid value of ``int_0^{y_row} K(y_row, xi) v(x_column, xi) dxi``.

    ``row`` defaults to the graph node of the column.
    """
    grid = v.grid
    if kt.n != grid.n:
        raise UsageError(f"kernel table n={kt.n} does not match grid n={grid.n}")
    j = int(grid.j_top[column]) if row is None else int(row)
    q = kt.quadrature_matrix()[j, : j + 1]
    return float(q @ v.values[column, : j + 1])


def control_operator(grid: Grid, kt: KernelTable) -> tuple[np.ndarray, sp.csr_matrix]:
    """Flat indices of controlled nodes and the sparse map ``v -> U``."""
    if kt.n != grid.n:
        raise UsageError(f"kernel table n={kt.n} does not match grid n={grid.n}")
    n = grid.n
    q = kt.quadrature_matrix()
    ci, cj = np.nonzero(grid.controlled)
    rows, cols, vals = [], [], []
    for r, (i, j) in enumerate(zip(ci, cj)):
        rows.append(np.full(j + 1, r))
        cols.append(i * n + np.arange(j + 1))
        vals.append(q[j, : j + 1])
    C = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ci.size, n * n))
    return ci * n + cj, C


class Stepper:
    """Forward-Euler closed-loop update with precomputed masks and
    feedback operator."""

    def __init__(self, grid: Grid, cfg: SimConfig, kt: KernelTable):
        if kt.n != grid.n or kt.lam != cfg.lam:
            raise UsageError(
                f"kernel table (lambda={kt.lam:g}, n={kt.n}) does not match "
                f"config (lambda={cfg.lam:g}, n={grid.n})")
        self.grid = grid
        self.dt = float(cfg.dt)
        self.lam = float(cfg.lam)
        self.control_enabled = bool(cfg.control_enabled)
        self._interior = grid.interior.astype(float)
        self._keep = (~(grid.dirichlet | grid.exterior)).astype(float)
        self._idx, self._C = control_operator(grid, kt)
        self._r = self.dt / grid.h ** 2

    def __call__(self, v: np.ndarray) -> np.ndarray:
        lap = np.zeros_like(v)
        lap[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:]
                           + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1])
        new = v + self._interior * (self._r * lap + (self.dt * self.lam) * v)
        new *= self._keep
        flat = new.reshape(-1)
        if self.control_enabled:
            # controlled nodes still hold the previous feedback here
            flat[self._idx] = self._C @ flat
        else:
            flat[self._idx] = 0.0
        return new


def step(v: Field, cfg: SimConfig, kt: KernelTable) -> Field:
    """One forward-Euler step followed by boundary enforcement."""
    stepper = Stepper(v.grid, cfg, kt)
    new = stepper(v.values)
    if not np.all(np.isfinite(new)):
        raise DivergenceError("non-finite state after one step", step=1)
    return Field(v.grid, new)


# -- runs ----------------------------------------------------------------------

@dataclass
class Trajectory:
    cfg: SimConfig
    grid: Grid
    times: np.ndarray
    norms: np.ndarray
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    transformed_times: list = field(default_factory=list)
    transformed_norms: list = field(default_factory=list)

    @property
    def series(self) -> NormSeries:
        return NormSeries(self.times, self.norms)


def _summarise(traj: Trajectory, diverged: bool) -> dict:
    norms = traj.norms
    init = float(norms[0])
    final = float(norms[-1])
    summary = {
        "steps": int(len(norms) - 1),
        "dt": traj.cfg.dt,
        "t_end": float(traj.times[-1]),
        "initial_norm": init,
        "final_norm": final,
        "norm_ratio": final / init if init > 0 else float("nan"),
        "diverged": diverged,
        "decay_rate": None,
        "decay_r_squared": None,
        "floor_hit": None,
    }
    try:
        fit: DecayFit = fit_decay_rate(traj.series)
    except UsageError:
        return summary
    summary.update(decay_rate=fit.rate, decay_r_squared=fit.r_squared,
                   floor_hit=fit.floor_hit)
    return summary


def run(cfg: SimConfig, *,
        on_snapshot: Optional[Callable[[int, float, Field], None]] = None,
        keep_snapshots: bool = True,
        track_transformed: bool = False,
        kernel_table: Optional[KernelTable] = None) -> Trajectory:
    """Integrate the scenario to ``t_final``.

    The L2 norm is recorded every step; snapshots every ``snapshot_every``
    steps, including the first and last state; ``on_snapshot`` receives
    ``(step, t, field)`` for each of them. A blow-up (non-finite state,
    or norm above ``divergence_factor`` times its initial value) raises
    :class:`DivergenceError` carrying the partial trajectory.

    With ``track_transformed`` the norm of the backstepping image ``w`` is
    recorded at every snapshot as well.
    """
    grid = build_grid(cfg.graph, cfg.n)
    kt = kernel_table if kernel_table is not None else build_kernel_table(cfg.lam, cfg.n)
    stepper = Stepper(grid, cfg, kt)
    v = initial_condition(cfg.initial_condition, grid, seed=cfg.seed).values

    n_steps = cfg.n_steps
    times = np.zeros(n_steps + 1)
    norms = np.zeros(n_steps + 1)
    traj = Trajectory(cfg, grid, times, norms)
    times[0] = 0.0
    norms[0] = l2_norm(Field(grid, v))
    limit = cfg.divergence_factor * max(norms[0], 1e-300)

    def snap(s, t, values):
        f = Field(grid, values.copy())
        if keep_snapshots:
            traj.snapshot_times.append(t)
            traj.snapshots.append(f)
        if track_transformed:
            traj.transformed_times.append(t)
            traj.transformed_norms.append(l2_norm(forward_transform(f, kt)))
        if on_snapshot is not None:
            on_snapshot(s, t, f)

    snap(0, 0.0, v)
    w = grid.trapezoid_weights() * grid.h ** 2
    for s in range(1, n_steps + 1):
        v = stepper(v)
        t = s * cfg.dt
        norm = float(np.sqrt(np.sum(w * v * v)))
        times[s], norms[s] = t, norm
        if not math.isfinite(norm) or norm > limit:
            traj.times, traj.norms = times[: s + 1], norms[: s + 1]
            snap(s, t, v)
            traj.summary = _summarise(traj, diverged=True)
            reason = "non-finite state" if not math.isfinite(norm) else (
                f"L2 norm grew past {cfg.divergence_factor:g} x its initial value")
            raise DivergenceError(f"divergence at step {s} (t = {t:.6g}): {reason}",
                                  step=s, trajectory=traj)
        if s % cfg.snapshot_every == 0 or s == n_steps:
            snap(s, t, v)
    traj.summary = _summarise(traj, diverged=False)
    return traj
