from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid


@dataclass(eq=False)
class Field:
    """Nodal values on a :class:`Grid`; exterior nodes are held at zero."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if values.shape != (n, n):
            raise ValueError(
                f"field shape {values.shape} does not match grid ({n}, {n})")
        self.values = np.where(self.grid.exterior, 0.0, values)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros((grid.n, grid.n)))

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))
