"""Hypograph domains and their staircase discretization.

A domain is ``{(x, y) : 0 <= x <= 1, 0 <= y <= phi(x)}`` where ``phi`` is a
piecewise-affine :class:`BoundaryGraph`. :func:`build_grid` snaps the graph
onto an ``n x n`` lattice of the unit square and labels every node.

Arrays are indexed ``[i, j]`` with ``i`` the column (x) and ``j`` the row (y).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, GeometryError

# slack for float noise when snapping phi(x_i)/h to a row index
_SNAP_EPS = 1e-9


class NodeKind(enum.IntEnum):
    INTERIOR = 0
    DIRICHLET_ZERO = 1
    CONTROLLED = 2
    EXTERIOR = 3


@dataclass(frozen=True)
class Segment:
    x_start: float
    x_end: float
    value_start: float
    value_end: float

    def __call__(self, x):
        width = self.x_end - self.x_start
        frac = (np.asarray(x, dtype=float) - self.x_start) / width
        return self.value_start + frac * (self.value_end - self.value_start)


@dataclass(frozen=True)
class BoundaryGraph:
    """Piecewise-affine profile ``phi: [0, 1] -> (0, 1]``.

    Segments must tile ``[0, 1]`` in order. Jumps between segments are
    allowed; at a jump ``phi`` takes the left limit.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise GeometryError("a boundary graph needs at least one segment")
        if not math.isclose(segs[0].x_start, 0.0, abs_tol=1e-12):
            raise GeometryError("first segment must start at x = 0")
        if not math.isclose(segs[-1].x_end, 1.0, abs_tol=1e-12):
            raise GeometryError("last segment must end at x = 1")
        for prev, cur in zip(segs, segs[1:]):
            if not math.isclose(prev.x_end, cur.x_start, abs_tol=1e-12):
                raise GeometryError(
                    f"segments leave a gap or overlap at x = {prev.x_end}")
        for s in segs:
            if not s.x_end > s.x_start:
                raise GeometryError(
                    f"segment [{s.x_start}, {s.x_end}] has non-positive width")
            for value in (s.value_start, s.value_end):
                if not 0.0 < value <= 1.0:
                    raise GeometryError(
                        f"phi must lie in (0, 1], got {value} on "
                        f"[{s.x_start}, {s.x_end}]")

    @classmethod
    def from_pieces(cls, pieces: Sequence[Sequence[float]]) -> "BoundaryGraph":
        """Build from ``(x_end, value_at_start, value_at_end)`` triples."""
        segments = []
        x_start = 0.0
        for piece in pieces:
            if len(piece) != 3:
                raise GeometryError(
                    f"piece {tuple(piece)!r} is not (x_end, value_at_start, "
                    "value_at_end)")
            x_end, v0, v1 = (float(p) for p in piece)
            segments.append(Segment(x_start, x_end, v0, v1))
            x_start = x_end
        return cls(tuple(segments))

    @classmethod
    def constant(cls, height: float = 1.0) -> "BoundaryGraph":
        return cls((Segment(0.0, 1.0, height, height),))

    def to_pieces(self) -> list[list[float]]:
        return [[s.x_end, s.value_start, s.value_end] for s in self.segments]

    def __call__(self, x):
        return eval_phi(self, x)

    @property
    def min_height(self) -> float:
        return min(min(s.value_start, s.value_end) for s in self.segments)

    @property
    def area(self) -> float:
        return sum(0.5 * (s.value_start + s.value_end) * (s.x_end - s.x_start)
                   for s in self.segments)

    @property
    def tail_length(self) -> float:
        """Length of the set where ``phi == 1`` (the flat top part of the
        controlled boundary)."""
        total = 0.0
        for s in self.segments:
            if s.value_start == 1.0 and s.value_end == 1.0:
                total += s.x_end - s.x_start
        return total


def piano_default() -> BoundaryGraph:
    """Piano-shaped domain: full-height tail on [0, 0.4], a linear ramp down
    to half height on [0.4, 0.7], and a flat body at 0.5 on [0.7, 1]."""
    return BoundaryGraph.from_pieces([
        (0.4, 1.0, 1.0),
        (0.7, 1.0, 0.5),
        (1.0, 0.5, 0.5),
    ])


def eval_phi(g: BoundaryGraph, x):
    """Evaluate the profile at scalar or array ``x`` in [0, 1]."""
    xs = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xs)) or np.any(xs < 0.0) or np.any(xs > 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    ends = np.array([s.x_end for s in g.segments])
    # first segment whose right end is >= x: left limit at jumps
    idx = np.minimum(np.searchsorted(ends, xs, side="left"), len(ends) - 1)
    out = np.empty_like(xs)
    for k, seg in enumerate(g.segments):
        sel = idx == k
        if np.any(sel):
            out[sel] = seg(xs[sel])
    if out.ndim == 0:
        return float(out)
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Labelled ``n x n`` lattice over the unit square.

    ``j_top[i]`` is the row of the snapped graph in column ``i``. Nodes above
    it are exterior. The graph node of every column is ``CONTROLLED``; so is
    every node on a vertical riser of the staircase (a node below ``j_top``
    whose left or right neighbour is exterior), because it lies on the
    actuated boundary of the discrete domain.
    """

    graph: BoundaryGraph
    n: int
    j_top: np.ndarray
    mask: np.ndarray
    h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", 1.0 / (self.n - 1))

    @property
    def coords(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def interior(self) -> np.ndarray:
        return self.mask == NodeKind.INTERIOR

    @property
    def dirichlet(self) -> np.ndarray:
        return self.mask == NodeKind.DIRICHLET_ZERO

    @property
    def controlled(self) -> np.ndarray:
        return self.mask == NodeKind.CONTROLLED

    @property
    def exterior(self) -> np.ndarray:
        return self.mask == NodeKind.EXTERIOR

    @property
    def inside(self) -> np.ndarray:
        """Every node of the closed discrete domain."""
        return self.mask != NodeKind.EXTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.dirichlet | self.controlled

    @property
    def deep_interior(self) -> np.ndarray:
        """Interior nodes whose four stencil neighbours are interior too."""
        core = self.interior
        out = np.zeros_like(core)
        out[1:-1, 1:-1] = (core[1:-1, 1:-1] & core[2:, 1:-1] & core[:-2, 1:-1]
                           & core[1:-1, 2:] & core[1:-1, :-2])
        return out

    def graph_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays ``(i, j_top[i])`` of the snapped graph."""
        cols = np.arange(self.n)
        return cols, self.j_top.copy()

    def full_height_columns(self) -> np.ndarray:
        """Columns whose graph node sits on ``y = 1`` (the tail of the
        controlled boundary); used only for labelling."""
        return np.flatnonzero(self.j_top == self.n - 1)

    def snapped_height(self, x):
        """Height of the staircase domain: column ``i`` owns the cell
        ``[x_i - h/2, x_i + h/2)``."""
        xs = np.asarray(x, dtype=float)
        i = np.clip(np.floor(xs / self.h + 0.5).astype(int), 0, self.n - 1)
        return self.j_top[i] * self.h

    def trapezoid_weights(self) -> np.ndarray:
        """2D trapezoid weights on the masked region.

        A lattice cell counts as inside when its four corners are inside; a
        node's weight is the number of inside cells touching it over four
        (1 interior, 1/2 edge, 1/4 convex corner).
        """
        ins = self.inside.astype(float)
        cells = ins[:-1, :-1] * ins[1:, :-1] * ins[:-1, 1:] * ins[1:, 1:]
        w = np.zeros((self.n, self.n))
        w[:-1, :-1] += cells
        w[1:, :-1] += cells
        w[:-1, 1:] += cells
        w[1:, 1:] += cells
        return w / 4.0


def _snap_rows(g: BoundaryGraph, n: int) -> np.ndarray:
    x = np.linspace(0.0, 1.0, n)
    scaled = eval_phi(g, x) * (n - 1)
    # round half up
    return np.floor(scaled + 0.5 + _SNAP_EPS).astype(int)


def build_grid(g: BoundaryGraph, n: int) -> Grid:
    """Snap ``g`` to the ``n x n`` lattice and classify every node."""
    n = int(n)
    if n < 3:
        raise GeometryError(f"grid needs at least 3 nodes per side, got {n}")
    j_top = _snap_rows(g, n)
    thin = np.flatnonzero(j_top <= 1)
    if thin.size:
        i = int(thin[0])
        raise GeometryError(
            f"domain is thinner than two cells at column {i} "
            f"(x = {i / (n - 1):.4g}, phi = {eval_phi(g, i / (n - 1)):.4g}, "
            f"h = {1 / (n - 1):.4g}); refine the grid")

    rows = np.arange(n)[None, :]
    top = j_top[:, None]
    mask = np.full((n, n), NodeKind.INTERIOR, dtype=np.int8)
    mask[rows > top] = NodeKind.EXTERIOR
    mask[0, :][rows[0] < j_top[0]] = NodeKind.DIRICHLET_ZERO
    mask[-1, :][rows[0] < j_top[-1]] = NodeKind.DIRICHLET_ZERO
    mask[:, 0] = NodeKind.DIRICHLET_ZERO

    # risers: below the graph but next to an exterior node
    left = np.empty(n, dtype=int)
    right = np.empty(n, dtype=int)
    left[1:], right[:-1] = j_top[:-1], j_top[1:]
    left[0] = right[-1] = n  # never a riser through the side walls
    riser = ((rows > np.minimum(left, right)[:, None]) & (rows < top)
             & (mask == NodeKind.INTERIOR))
    mask[riser] = NodeKind.CONTROLLED
    mask[np.arange(n), j_top] = NodeKind.CONTROLLED

    return Grid(graph=g, n=n, j_top=_readonly(j_top), mask=_readonly(mask))
