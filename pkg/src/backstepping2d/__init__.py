"""Backstepping boundary control of ``v_t = v_xx + v_yy + lam v`` on domains
bounded above by a graph ``y = phi(x)``."""

__version__ = "0.1.0"

from .diagnostics import (DecayFit, NormSeries, fit_decay_rate, l2_norm,
                          principal_eigenpair, principal_eigenvalue)
from .errors import (BacksteppingError, ConfigError, ConvergenceError,
                     DivergenceError, DomainError, GeometryError,
                     SingularTransformError, UsageError)
from .estimator import BacksteppingTransformer
from .field import Field
from .geometry import (BoundaryGraph, Grid, NodeKind, build_grid, eval_phi,
                       piano_default)
from .kernel import (KernelTable, build_kernel_table, eval_kernel,
                     kernel_pde_residual, solve_kernel_goursat)
from .simulator import (SimConfig, Trajectory, control_trace, dt_max,
                        initial_condition, run, step)
from .transform import forward_transform, inverse_transform, target_residual

__all__ = [
    "BacksteppingError", "BacksteppingTransformer", "BoundaryGraph",
    "ConfigError", "ConvergenceError", "DecayFit", "DivergenceError",
    "DomainError", "Field", "GeometryError", "Grid", "KernelTable",
    "NodeKind", "NormSeries", "SimConfig", "SingularTransformError",
    "Trajectory", "UsageError", "build_grid", "build_kernel_table",
    "control_trace", "dt_max", "eval_kernel", "eval_phi", "fit_decay_rate",
    "forward_transform", "initial_condition", "inverse_transform",
    "kernel_pde_residual", "l2_norm", "piano_default", "principal_eigenpair",
    "principal_eigenvalue", "run", "solve_kernel_goursat", "step",
    "target_residual",
]
