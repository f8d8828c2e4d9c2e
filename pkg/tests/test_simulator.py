import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from backstepping2d import (BoundaryGraph, ConfigError, DivergenceError, Field,
                            SimConfig, build_grid, build_kernel_table,
                            control_trace, dt_max, eval_kernel,
                            initial_condition, l2_norm, piano_default,
                            principal_eigenvalue, run, step)
from backstepping2d.simulator import Stepper

SQUARE = BoundaryGraph.constant(1.0)


def test_cfl_bound_formula():
    assert dt_max(101, 0.0) == pytest.approx(1e-4 / 4)
    assert dt_max(101, 30.0) == pytest.approx(1e-4 / (4 + 30e-4))


def test_cfl_guard_rejects_large_step():
    bound = dt_max(41, 10.0)
    with pytest.raises(ConfigError, match="stability bound"):
        SimConfig(lam=10.0, n=41, dt=bound * 1.0001)
    assert SimConfig(lam=10.0, n=41, dt=bound).dt == bound


def test_default_step_is_cfl_fraction():
    cfg = SimConfig(lam=5.0, n=41)
    assert cfg.dt == pytest.approx(0.9 * dt_max(41, 5.0))


@pytest.mark.parametrize("kwargs", [
    dict(lam=250.0), dict(lam=1.0, t_final=0.0), dict(lam=1.0, snapshot_every=0),
    dict(lam=1.0, initial_condition="gaussian"), dict(lam=float("nan")),
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        SimConfig(**kwargs)


def test_bump_peaks_at_centre_and_vanishes_on_boundary():
    grid = build_grid(SQUARE, 41)
    v = initial_condition("bump", grid)
    i, j = np.unravel_index(np.argmax(v.values), v.values.shape)
    assert (i, j) == (20, 20)
    assert np.all(v.values[~grid.interior] == 0)


def test_bump_on_piano_stays_inside(piano81):
    v = initial_condition("bump", piano81)
    assert v.values.max() == pytest.approx(1.0, abs=0.05)
    assert np.all(v.values[~piano81.interior] == 0)


def test_random_field_is_reproducible(piano41):
    a = initial_condition("random_seeded", piano41, seed=7)
    b = initial_condition("random_seeded", piano41, seed=7)
    c = initial_condition("random_seeded", piano41, seed=8)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.all(np.abs(a.values) <= 1)
    assert np.all(a.values[piano41.boundary] == 0)


def test_product_sine_norm_on_square():
    # int sin^2(pi x) sin^2(pi y) = 1/4 and the trapezoid rule is exact on it
    grid = build_grid(SQUARE, 41)
    assert l2_norm(initial_condition("product_sine", grid)) == pytest.approx(0.5, abs=1e-12)


def test_product_sine_vanishes_on_piano_boundary(piano41):
    v = initial_condition("product_sine", piano41)
    assert np.all(v.values[piano41.boundary] == 0)
    assert v.values.max() > 0.9


def test_unknown_initial_condition(piano41):
    with pytest.raises(ConfigError):
        initial_condition("spiral", piano41)


def test_control_trace_zero_kernel(piano41):
    v = initial_condition("random_seeded", piano41)
    kt = build_kernel_table(0.0, 41)
    assert all(control_trace(v, kt, i) == 0.0 for i in range(41))


def test_control_trace_zero_state(piano41):
    kt = build_kernel_table(30.0, 41)
    assert control_trace(Field.zeros(piano41), kt, 10) == 0.0


def test_control_trace_against_simpson():
    n = 101
    grid = build_grid(SQUARE, n)
    kt = build_kernel_table(1.0, n)
    v = Field(grid, np.broadcast_to(grid.coords[None, :], (n, n)))
    xi = np.linspace(0, 1, 10_001)
    reference = simpson(eval_kernel(1.0, np.ones_like(xi), xi) * xi, x=xi)
    assert abs(control_trace(v, kt, 50) - reference) <= grid.h ** 2


def test_zero_is_equilibrium(piano41):
    cfg = SimConfig(lam=40.0, n=41)
    out = step(Field.zeros(piano41), cfg, build_kernel_table(40.0, 41))
    assert not np.any(out.values)


def test_single_step_on_eigenfunction():
    n = 41
    grid = build_grid(SQUARE, n)
    cfg = SimConfig(lam=0.0, n=n, graph=SQUARE)
    x = grid.coords
    v0 = np.outer(np.sin(np.pi * x), np.sin(np.pi * x))
    out = step(Field(grid, v0), cfg, build_kernel_table(0.0, n)).values
    h, dt = grid.h, cfg.dt
    discrete = 2 * (2 / h**2) * (1 - math.cos(math.pi * h))
    inner = grid.interior
    # exact for the 5-point stencil
    np.testing.assert_allclose(out[inner], ((1 - dt * discrete) * v0)[inner],
                               rtol=0, atol=1e-14)
    # and O(h^2 dt) away from the continuous decay factor
    err = np.max(np.abs(out - (1 - 2 * math.pi**2 * dt) * v0)[inner])
    assert err <= 2 * math.pi**4 / 12 * h**2 * dt * 2


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 1000))
def test_step_is_linear(a, b, seed):
    grid = build_grid(piano_default(), 21)
    cfg = SimConfig(lam=35.0, n=21)
    kt = build_kernel_table(35.0, 21)
    rng = np.random.default_rng(seed)
    v1 = Field(grid, rng.normal(size=(21, 21)))
    v2 = Field(grid, rng.normal(size=(21, 21)))
    lhs = step(a * v1 + b * v2, cfg, kt).values
    rhs = a * step(v1, cfg, kt).values + b * step(v2, cfg, kt).values
    scale = 1 + abs(a) + abs(b)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale * 10


def test_boundary_enforcement(piano41):
    lam = 40.0
    cfg = SimConfig(lam=lam, n=41)
    kt = build_kernel_table(lam, 41)
    v = initial_condition("random_seeded", piano41, seed=3)
    # give the controlled nodes some history
    v = step(v, cfg, kt)
    out = step(v, cfg, kt)
    assert np.all(out.values[piano41.dirichlet] == 0.0)
    assert np.all(out.values[piano41.exterior] == 0.0)
    # interior update alone, then feedback evaluated on that state
    stepper = Stepper(piano41, cfg.with_(control_enabled=False, dt=cfg.dt), kt)
    pre = stepper(v.values)
    pre[piano41.controlled] = v.values[piano41.controlled]
    pre_field = Field(piano41, pre)
    for i, j in np.argwhere(piano41.controlled):
        assert out.values[i, j] == pytest.approx(
            control_trace(pre_field, kt, i, row=j), rel=1e-12, abs=1e-15)


def test_open_loop_zeroes_controlled_nodes(piano41):
    cfg = SimConfig(lam=40.0, n=41, control_enabled=False)
    v = initial_condition("random_seeded", piano41)
    out = step(v, cfg, build_kernel_table(40.0, 41))
    assert np.all(out.values[piano41.controlled] == 0.0)


def test_zero_lambda_feedback_vanishes_bitwise():
    base = SimConfig(lam=0.0, n=31, t_final=0.05, initial_condition="random_seeded",
                     snapshot_every=20)
    a = run(base)
    b = run(base.with_(control_enabled=False))
    assert np.array_equal(a.norms, b.norms)
    for fa, fb in zip(a.snapshots, b.snapshots):
        assert np.array_equal(fa.values, fb.values)


def test_pure_heat_dissipates():
    traj = run(SimConfig(lam=0.0, n=41, t_final=0.1, control_enabled=False))
    assert traj.summary["final_norm"] < traj.summary["initial_norm"]
    assert traj.summary["diverged"] is False


def test_snapshot_cadence():
    cfg = SimConfig(lam=1.0, n=21, t_final=0.01, snapshot_every=7)
    traj = run(cfg)
    steps = cfg.n_steps
    expected = sorted({0, *range(7, steps + 1, 7), steps})
    assert len(traj.snapshots) == len(expected)
    assert traj.snapshot_times == pytest.approx([s * cfg.dt for s in expected])
    assert len(traj.norms) == steps + 1


@pytest.fixture(scope="module")
def unstable_pair():
    grid = build_grid(piano_default(), 41)
    lam1 = principal_eigenvalue(grid)
    cfg = SimConfig(lam=1.5 * lam1, n=41, t_final=0.5)
    return lam1, run(cfg.with_(control_enabled=False)), run(cfg, track_transformed=True)


def test_open_loop_grows_at_lambda_minus_eigenvalue(unstable_pair):
    lam1, open_loop, _ = unstable_pair
    assert open_loop.summary["norm_ratio"] >= 10
    growth = -open_loop.summary["decay_rate"]
    assert growth == pytest.approx(0.5 * lam1, rel=0.10)


def test_closed_loop_decays(unstable_pair):
    lam1, _, closed = unstable_pair
    assert closed.summary["norm_ratio"] <= 0.1
    assert closed.summary["decay_rate"] == pytest.approx(lam1, rel=0.15)
    assert len(closed.transformed_norms) == len(closed.snapshots)


def test_divergence_carries_partial_trajectory():
    cfg = SimConfig(lam=40.0, n=21, t_final=2.0, control_enabled=False,
                    divergence_factor=50.0)
    with pytest.raises(DivergenceError) as info:
        run(cfg)
    traj = info.value.trajectory
    assert traj.summary["diverged"] is True
    assert traj.norms[-1] > 50 * traj.norms[0]
    assert len(traj.norms) == info.value.step + 1
    assert np.all(traj.norms[:-1] <= 50 * traj.norms[0])
