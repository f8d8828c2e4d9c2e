"""INI scenario files.

Four sections, all optional except ``[pde]``::

    [domain]
    shape = piano            ; piano | rectangle | pieces
    height = 1.0             ; rectangle only
    pieces = 0.4 1 1, 0.7 1 0.5, 1 0.5 0.5   ; (x_end, phi_start, phi_end)

    [pde]
    lambda = 45.0            ; or lambda_over_eigen = 1.5
    control = true

    [numerics]
    n = 81
    dt = 3e-5                ; omit for cfl_fraction * dt_max
    cfl_fraction = 0.9
    t_final = 0.5
    initial_condition = bump ; bump | product_sine | random_seeded
    seed = 7
    divergence_factor = 1e8
    residual_burn_in = 0.05  ; transform-check only

    [output]
    dir = out
    snapshot_every = 100
    write_snapshots = true

Unknown sections or keys are errors. The same structure, as nested JSON
objects, is accepted from a run manifest's ``config`` echo.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

from .diagnostics import principal_eigenvalue
from .errors import ConfigError, GeometryError
from .geometry import BoundaryGraph, build_grid, piano_default
from .simulator import SimConfig

SCHEMA = {
    "domain": {"shape", "height", "pieces"},
    "pde": {"lambda", "lambda_over_eigen", "control"},
    "numerics": {"n", "dt", "cfl_fraction", "t_final", "initial_condition",
                 "seed", "divergence_factor", "residual_burn_in"},
    "output": {"dir", "snapshot_every", "write_snapshots"},
}


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    out_dir: Optional[str]
    write_snapshots: bool
    residual_burn_in: float
    lambda_over_eigen: Optional[float]
    eigenvalue: Optional[float]

    def echo(self) -> dict:
        """Canonical, fully resolved config; feeding it back through
        :func:`config_from_mapping` reproduces the run."""
        sim = self.sim
        domain = {"shape": "pieces", "pieces": sim.graph.to_pieces()}
        numerics = {
            "n": sim.n, "dt": sim.dt, "t_final": sim.t_final,
            "initial_condition": sim.initial_condition, "seed": sim.seed,
            "divergence_factor": sim.divergence_factor,
            "residual_burn_in": self.residual_burn_in,
        }
        out = {"snapshot_every": sim.snapshot_every,
               "write_snapshots": self.write_snapshots}
        if self.out_dir is not None:
            out["dir"] = self.out_dir
        return {"domain": domain,
                "pde": {"lambda": sim.lam, "control": sim.control_enabled},
                "numerics": numerics, "output": out}


def _float(section, key, value):
    if isinstance(value, bool):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}") from None


def _int(section, key, value):
    f = _float(section, key, value)
    if f != int(f):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    return int(f)


def _bool(section, key, value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key} must be a boolean, got {value!r}")


def _pieces(value):
    if isinstance(value, str):
        rows = [chunk.split() for chunk in value.replace(";", ",").split(",")
                if chunk.strip()]
    else:
        rows = list(value)
    try:
        return [[float(p) for p in row] for row in rows]
    except (TypeError, ValueError):
        raise ConfigError(f"[domain] pieces is malformed: {value!r}") from None


def _graph(domain: Mapping[str, Any]) -> BoundaryGraph:
    shape = str(domain.get("shape", "piano")).strip()
    try:
        if shape == "piano":
            extra = set(domain) - {"shape"}
            if extra:
                raise ConfigError(f"[domain] shape=piano takes no {sorted(extra)}")
            return piano_default()
        if shape == "rectangle":
            return BoundaryGraph.constant(_float("domain", "height",
                                                 domain.get("height", 1.0)))
        if shape == "pieces":
            if "pieces" not in domain:
                raise ConfigError("[domain] shape=pieces needs a pieces key")
            return BoundaryGraph.from_pieces(_pieces(domain["pieces"]))
    except GeometryError as exc:
        raise ConfigError(f"[domain] {exc}") from None
    raise ConfigError(
        f"[domain] unknown shape {shape!r}; expected piano, rectangle or pieces")


def config_from_mapping(data: Mapping[str, Mapping[str, Any]], *,
                        lam: Optional[float] = None,
                        n: Optional[int] = None) -> RunConfig:
    """Validate a section -> key -> value mapping.

    ``lam`` and ``n`` override the file, as the CLI flags do.
    """
    for section, keys in data.items():
        if section not in SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; expected one of "
                f"{', '.join('[' + s + ']' for s in SCHEMA)}")
        unknown = set(keys) - SCHEMA[section]
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    domain = data.get("domain", {})
    pde = data.get("pde", {})
    num = data.get("numerics", {})
    out = data.get("output", {})

    graph = _graph(domain)
    n_val = n if n is not None else _int("numerics", "n", num.get("n", 81))
    factor = None
    eigen = None
    if lam is not None:
        lam_val = float(lam)
    elif "lambda" in pde and "lambda_over_eigen" in pde:
        raise ConfigError("[pde] give either lambda or lambda_over_eigen, not both")
    elif "lambda" in pde:
        lam_val = _float("pde", "lambda", pde["lambda"])
    elif "lambda_over_eigen" in pde:
        factor = _float("pde", "lambda_over_eigen", pde["lambda_over_eigen"])
        try:
            eigen = principal_eigenvalue(build_grid(graph, n_val))
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None
        lam_val = factor * eigen
    else:
        raise ConfigError("[pde] needs lambda or lambda_over_eigen")

    kwargs = dict(
        lam=lam_val,
        n=n_val,
        control_enabled=_bool("pde", "control", pde.get("control", True)),
        t_final=_float("numerics", "t_final", num.get("t_final", 0.5)),
        initial_condition=str(num.get("initial_condition", "bump")).strip(),
        seed=_int("numerics", "seed", num.get("seed", 7)),
        snapshot_every=_int("output", "snapshot_every", out.get("snapshot_every", 100)),
        graph=graph,
        cfl_fraction=_float("numerics", "cfl_fraction", num.get("cfl_fraction", 0.9)),
        divergence_factor=_float("numerics", "divergence_factor",
                                 num.get("divergence_factor", 1e8)),
    )
    if num.get("dt") is not None:
        kwargs["dt"] = _float("numerics", "dt", num["dt"])
    sim = SimConfig(**kwargs)
    burn = _float("numerics", "residual_burn_in", num.get("residual_burn_in", 0.05))
    if burn < 0.0:
        raise ConfigError(f"[numerics] residual_burn_in must be >= 0, got {burn}")
    return RunConfig(
        sim=sim,
        out_dir=str(out["dir"]) if "dir" in out else None,
        write_snapshots=_bool("output", "write_snapshots",
                              out.get("write_snapshots", True)),
        residual_burn_in=burn,
        lambda_over_eigen=factor,
        eigenvalue=eigen,
    )


def read_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def load_config(path: str | Path, *, lam: Optional[float] = None,
                n: Optional[int] = None) -> RunConfig:
    return config_from_mapping(read_config(path), lam=lam, n=n)
