"""Command line entry point.

    backstepping2d simulate --config run.ini [--out DIR] [--lambda X] [--n N]
    backstepping2d compare --config run.ini
    backstepping2d kernel-check --lambda 10 --n 101
    backstepping2d eigen --config run.ini
    backstepping2d transform-check --config run.ini

Exit codes: 0 success, 1 bad input, 2 numerical divergence or solver
failure. JSON goes to stdout, messages to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .diagnostics import NormSeries, fit_decay_rate, principal_eigenpair
from .errors import (BacksteppingError, ConfigError, ConvergenceError,
                     DivergenceError, UsageError)
from .field import Field
from .geometry import build_grid
from .kernel import (build_kernel_table, kernel_pde_residual,
                     solve_kernel_goursat)
from .simulator import Trajectory, run
from .transform import TargetResidual

OUT_ENV = "BACKSTEPPING2D_OUT"
EXIT_OK, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_norms_csv(path: Path, times, norms) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "l2_norm"])
        for t, y in zip(times, norms):
            out.writerow([_fmt(t), _fmt(y)])


def write_snapshot_csv(path: Path, f: Field) -> None:
    grid = f.grid
    xs = grid.coords
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "v"])
        for i, j in np.argwhere(grid.inside):
            out.writerow([_fmt(xs[i]), _fmt(xs[j]), _fmt(f.values[i, j])])


def write_kernel_csv(path: Path, values: np.ndarray) -> None:
    n = values.shape[0]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for j in range(n):
            out.writerow([_fmt(values[j, k]) if k <= j else "" for k in range(n)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _print_json(data) -> None:
    print(json.dumps(_jsonable(data), indent=2, sort_keys=True))


def _out_dir(args, rc: Optional[RunConfig]) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if rc is not None and rc.out_dir:
        return Path(rc.out_dir)
    return Path("out")


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config PATH is required for this subcommand")
    return load_config(args.config, lam=args.lam, n=args.n)


# -- simulate / compare --------------------------------------------------------

def _execute(rc: RunConfig, out: Path, control: bool) -> tuple[Trajectory, bool, list]:
    """Run one scenario, writing its CSVs under ``out``."""
    sim = rc.sim if control == rc.sim.control_enabled else rc.sim.with_(
        control_enabled=control, dt=rc.sim.dt)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    snap_dir = out / "snapshots"
    if rc.write_snapshots:
        snap_dir.mkdir(exist_ok=True)

    def on_snapshot(step, t, f):
        if rc.write_snapshots:
            p = snap_dir / f"snapshot_{step:07d}.csv"
            write_snapshot_csv(p, f)
            files.append(p)

    diverged = False
    try:
        traj = run(sim, on_snapshot=on_snapshot, keep_snapshots=False,
                   track_transformed=control)
    except DivergenceError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        traj, diverged = exc.trajectory, True
    p = out / "norms.csv"
    write_norms_csv(p, traj.times, traj.norms)
    files.append(p)
    if control and len(traj.transformed_norms) > 1:
        p = out / "transformed_norms.csv"
        write_norms_csv(p, traj.transformed_times, traj.transformed_norms)
        files.append(p)
    return traj, diverged, files


def _run_summary(traj: Trajectory, rc: RunConfig) -> dict:
    summary = dict(traj.summary)
    summary["lambda"] = traj.cfg.lam
    summary["control_enabled"] = traj.cfg.control_enabled
    summary["snapshot_count"] = None
    if rc.eigenvalue is not None:
        summary["principal_eigenvalue"] = rc.eigenvalue
    if len(traj.transformed_norms) > 1:
        try:
            fit = fit_decay_rate(NormSeries(np.array(traj.transformed_times),
                                            np.array(traj.transformed_norms)))
            summary["transformed_decay_rate"] = fit.rate
            summary["transformed_r_squared"] = fit.r_squared
        except UsageError:
            pass
    return summary


def _manifest(path: Path, rc: RunConfig, started: float, files: list,
              summary: dict, root: Path) -> None:
    files = [str(Path(f).relative_to(root)) for f in files]
    manifest = {
        "config": rc.echo(),
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - started,
        "outputs": files,
        "summary": summary,
    }
    with open(path, "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    rc = _load(args)
    out = _out_dir(args, rc)
    traj, diverged, files = _execute(rc, out, rc.sim.control_enabled)
    summary = _run_summary(traj, rc)
    summary["snapshot_count"] = sum(1 for f in files if f.parent.name == "snapshots")
    _manifest(out / "manifest.json", rc, started, files, summary, out)
    _print_json({"manifest": str(out / "manifest.json"), **summary})
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_compare(args) -> int:
    started = time.perf_counter()
    rc = _load(args)
    out = _out_dir(args, rc)
    results = {}
    files = []
    for label, control in (("open", False), ("closed", True)):
        traj, diverged, f = _execute(rc, out / label, control)
        s = _run_summary(traj, rc)
        s["snapshot_count"] = sum(1 for p in f if p.parent.name == "snapshots")
        results[label] = (traj, diverged, s)
        files += f
    open_t, open_div, open_s = results["open"]
    closed_t, closed_div, closed_s = results["closed"]
    summary = {
        "open": open_s,
        "closed": closed_s,
        "open_growth_factor": open_s["final_norm"] / open_s["initial_norm"],
        "closed_decay_factor": closed_s["initial_norm"] / closed_s["final_norm"]
        if closed_s["final_norm"] > 0 else float("inf"),
        "identical_norm_series": bool(
            open_t.norms.shape == closed_t.norms.shape
            and np.array_equal(open_t.norms, closed_t.norms)),
    }
    if rc.eigenvalue is not None:
        summary["principal_eigenvalue"] = rc.eigenvalue
    _manifest(out / "manifest.json", rc, started, files, summary, out)
    _print_json({"manifest": str(out / "manifest.json"),
                 **{k: v for k, v in summary.items() if k not in ("open", "closed")},
                 "open_diverged": open_div, "closed_diverged": closed_div})
    # open-loop blow-up is the expected contrast, closed-loop blow-up is not
    return EXIT_DIVERGED if closed_div else EXIT_OK


# -- checks --------------------------------------------------------------------

def kernel_metrics(lam: float, n: int) -> dict:
    table = build_kernel_table(lam, n)
    oracle = solve_kernel_goursat(lam, n)
    diag, edge = table.boundary_errors()
    residual = kernel_pde_residual(table)
    refined = kernel_pde_residual(build_kernel_table(lam, 2 * n - 1))
    return {
        "lambda": lam,
        "n": n,
        "pde_residual": residual,
        "goursat_max_diff": float(np.max(np.abs(table.values - oracle.values))),
        "boundary_error": max(diag, edge),
        "refined_n": 2 * n - 1,
        "refined_pde_residual": refined,
        "residual_ratio": residual / refined if refined > 0 else None,
    }, table


def cmd_kernel_check(args) -> int:
    lam = 0.0 if args.lam is None else args.lam
    n = 101 if args.n is None else args.n
    if n < 2:
        raise ConfigError(f"--n must be at least 2, got {n}")
    if abs(lam) > 200:
        raise ConfigError(f"|lambda| must be at most 200, got {lam}")
    metrics, table = kernel_metrics(lam, n)
    out = _out_dir(args, None)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "kernel_table.csv"
    write_kernel_csv(path, table.values)
    metrics["table_csv"] = str(path)
    _print_json(metrics)
    return EXIT_OK


def cmd_eigen(args) -> int:
    rc = _load(args)
    grid = build_grid(rc.sim.graph, rc.sim.n)
    res = principal_eigenpair(grid)
    _print_json({"eigenvalue": res.value, "iterations": res.iterations,
                 "n": grid.n, "interior_nodes": int(grid.interior.sum())})
    return EXIT_OK


def transform_residuals(rc: RunConfig, n: int) -> dict:
    """Closed-loop run at ``n``; residuals from snapshots after the burn-in."""
    sim = rc.sim.with_(n=n, control_enabled=True)
    kt = build_kernel_table(sim.lam, n)
    acc = TargetResidual(kt)
    every = sim.snapshot_every

    def on_snapshot(step, t, f):
        if step % every == 0 and t >= rc.residual_burn_in - 1e-12:
            acc.add(t, f)

    run(sim, on_snapshot=on_snapshot, keep_snapshots=False, kernel_table=kt)
    interior, boundary = acc.result()
    return {"n": n, "dt": sim.dt, "snapshots": acc.count,
            "interior_residual": interior, "boundary_residual": boundary}


def cmd_transform_check(args) -> int:
    rc = _load(args)
    if rc.residual_burn_in >= rc.sim.t_final:
        raise ConfigError("[numerics] residual_burn_in must be below t_final")
    coarse = transform_residuals(rc, rc.sim.n)
    fine = transform_residuals(rc, 2 * rc.sim.n - 1)

    def ratio(key):
        return coarse[key] / fine[key] if fine[key] > 0 else None

    _print_json({"lambda": rc.sim.lam, "burn_in": rc.residual_burn_in,
                 "levels": [coarse, fine],
                 "interior_ratio": ratio("interior_residual"),
                 "boundary_ratio": ratio("boundary_residual")})
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "kernel-check": cmd_kernel_check,
    "eigen": cmd_eigen,
    "transform-check": cmd_transform_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backstepping2d",
        description="Backstepping boundary control of the 2D reaction-diffusion "
                    "equation on hypograph domains.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI scenario file")
        p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV})")
        p.add_argument("--lambda", dest="lam", type=float,
                       help="reaction coefficient, overrides the config")
        p.add_argument("--n", type=int, help="nodes per side, overrides the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except BacksteppingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
