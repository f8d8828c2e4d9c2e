"""scikit-learn style front end for the backstepping transform.

``fit`` discretizes the domain and tabulates the kernel once; afterwards
``transform`` / ``inverse_transform`` map stacks of nodal fields, and
``predict`` returns the boundary feedback for each field. Because the
estimator only holds hyperparameters in ``__init__`` it clones, pickles and
plugs into pipelines like any other transformer.

    >>> est = BacksteppingTransformer(lam=20.0, n=41).fit()
    >>> X = est.random_fields(3, seed=0)
    >>> W = est.transform(X)
    >>> bool(abs(est.inverse_transform(W) - X).max() < 1e-10)
    True
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .diagnostics import l2_norm, principal_eigenvalue
from .field import Field
from .geometry import BoundaryGraph, build_grid, piano_default
from .kernel import build_kernel_table
from .simulator import control_operator
from .transform import forward_transform, inverse_transform


def check_fields(X, n: int) -> tuple[np.ndarray, bool]:
    """Validate a single ``(n, n)`` field or an ``(m, n, n)`` stack.

    Returns a float 3D array and whether the input was a single field.
    """
    arr = np.asarray(X, dtype=float)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (n, n):
        raise ValueError(
            f"expected fields of shape ({n}, {n}) or (m, {n}, {n}), "
            f"got {np.shape(X)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("fields contain NaN or infinity")
    return arr, single


class BacksteppingTransformer(TransformerMixin, BaseEstimator):
    """Backstepping map ``v -> w`` on a hypograph domain.

    Parameters
    ----------
    lam : float
        Reaction coefficient.
    n : int
        Nodes per side of the lattice.
    graph : BoundaryGraph, optional
        Upper boundary; the piano profile when omitted.
    """

    def __init__(self, lam: float = 1.0, n: int = 81,
                 graph: BoundaryGraph | None = None):
        self.lam = lam
        self.n = n
        self.graph = graph

    def fit(self, X=None, y=None):
        graph = self.graph if self.graph is not None else piano_default()
        self.grid_ = build_grid(graph, self.n)
        self.kernel_table_ = build_kernel_table(self.lam, self.n)
        self.control_nodes_, self._control = control_operator(
            self.grid_, self.kernel_table_)
        if X is not None:
            check_fields(X, self.n)
        return self

    def _map(self, X, fn):
        check_is_fitted(self, "kernel_table_")
        arr, single = check_fields(X, self.n)
        out = np.stack([fn(Field(self.grid_, a), self.kernel_table_).values
                        for a in arr])
        return out[0] if single else out

    def transform(self, X):
        return self._map(X, forward_transform)

    def inverse_transform(self, X):
        return self._map(X, inverse_transform)

    def predict(self, X):
        """Feedback values at the controlled nodes (``control_nodes_`` gives
        their flat indices) for each field."""
        check_is_fitted(self, "kernel_table_")
        arr, single = check_fields(X, self.n)
        out = np.stack([self._control @ a.reshape(-1) for a in arr])
        return out[0] if single else out

    def score(self, X, y=None):
        """Negative worst round-trip error relative to the field size."""
        arr, _ = check_fields(X, self.n)
        back = self.inverse_transform(self.transform(arr))
        scale = max(float(np.max(np.abs(arr))), 1e-300)
        return -float(np.max(np.abs(back - arr))) / scale

    def norms(self, X) -> np.ndarray:
        """L2 norms of the transformed fields."""
        W, _ = check_fields(self.transform(X), self.n)
        return np.array([l2_norm(Field(self.grid_, w)) for w in W])

    def principal_eigenvalue(self) -> float:
        check_is_fitted(self, "grid_")
        return principal_eigenvalue(self.grid_)

    def random_fields(self, m: int, seed: int = 0) -> np.ndarray:
        """``m`` seeded fields uniform in [-1, 1] on the closed domain."""
        check_is_fitted(self, "grid_")
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1.0, 1.0, size=(m, self.n, self.n))
        return np.where(self.grid_.inside, X, 0.0)
