"""Run configuration: one YAML file with nested blocks.

Grammar::

    geometry:              # required
      preset: straight | arc | helix | table
      bend_radius: number  # arc
      curvature: number    # helix
      torsion: number      # helix
      path: points.csv     # table: rows of x,y,z samples along the curve
    radius:                # default: constant unit radius
      law: constant | s_sine | theta_cosine | mixed | table
      base: number         # and amplitude / turns / mode / slope per law
      path: radius.csv     # table: n_theta rows, n_s+1 columns
    discretization:
      n_s: 16              # all counts >= 4
      n_theta: 32
      n_rho: 32
    physics:               # required
      h: number            # 0 < h < 1
      flow_rate: 1.0
      outlet_pressure: 0.0
    toggles:
      transverse: true
      cutoff: true
    output:
      directory: out
      formats: csv | vtk | both | [csv, vtk]
    study:
      h_values: [0.1, 0.05, 0.025]   # compare-perturbation
      mesh_values: [8, 16, 32]       # converge

Table paths are resolved relative to the config file.  The environment
variables THINPIPE_OUTPUT (output directory) and THINPIPE_THREADS (worker
count) override the file; command-line flags beat both.  Everything else
lives in the file so a run is reproducible from it alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import Centerline, PipeGeometry, RadiusLaw

__all__ = ["RunConfig", "load_config", "build_geometry", "resolve_threads"]

_GEOMETRY_PARAMS = {
    "straight": set(),
    "arc": {"bend_radius"},
    "helix": {"curvature", "torsion"},
    "table": {"path"},
}
_GEOMETRY_REQUIRED = {
    "straight": set(),
    "arc": {"bend_radius"},
    "helix": {"curvature", "torsion"},
    "table": {"path"},
}
_RADIUS_PARAMS = {
    "constant": {"base"},
    "s_sine": {"base", "amplitude", "turns"},
    "theta_cosine": {"base", "amplitude", "mode"},
    "mixed": {"base", "amplitude", "mode", "slope"},
    "table": {"path"},
}
_TOP_BLOCKS = {"geometry", "radius", "discretization", "physics", "toggles", "output", "study"}
_FORMATS = {"csv", "vtk"}


@dataclass
class RunConfig:
    """Validated run parameters; inputs to every subcommand."""

    geometry: dict
    radius: dict
    n_s: int
    n_theta: int
    n_rho: int
    h: float
    flow_rate: float
    outlet_pressure: float
    transverse: bool
    cutoff: bool
    directory: str
    formats: tuple
    h_values: list | None = None
    mesh_values: list | None = None
    base_dir: Path = field(default_factory=Path)

    def echo(self):
        """Plain-dict form for run reports."""
        return {
            "geometry": dict(self.geometry),
            "radius": dict(self.radius),
            "discretization": {"n_s": self.n_s, "n_theta": self.n_theta, "n_rho": self.n_rho},
            "physics": {
                "h": self.h,
                "flow_rate": self.flow_rate,
                "outlet_pressure": self.outlet_pressure,
            },
            "toggles": {"transverse": self.transverse, "cutoff": self.cutoff},
            "output": {"directory": self.directory, "formats": list(self.formats)},
            "study": {"h_values": self.h_values, "mesh_values": self.mesh_values},
        }


def _mapping(data, name):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be a mapping, got {type(data).__name__}")
    return data


def _number(block, key, name, default=None, required=False, lo=None, lo_strict=None, hi_strict=None):
    if key not in block:
        if required:
            raise ConfigError(f"{name}.{key} is required")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {v!r}")
    v = float(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{name}.{key} must be >= {lo}, got {v}")
    if lo_strict is not None and v <= lo_strict:
        raise ConfigError(f"{name}.{key} must be > {lo_strict}, got {v}")
    if hi_strict is not None and v >= hi_strict:
        raise ConfigError(f"{name}.{key} must be < {hi_strict}, got {v}")
    return v


def _count(block, key, default):
    v = block.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"discretization.{key} must be an integer, got {v!r}")
    if v < 4:
        raise ConfigError(f"discretization.{key} must be >= 4, got {v}")
    return v


def _flag(block, key, default):
    v = block.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"toggles.{key} must be true or false, got {v!r}")
    return v


def _variant(block, key, allowed, params_table, name):
    kind = block.get(key)
    if kind is None:
        raise ConfigError(f"{name}.{key} is required (one of {', '.join(sorted(allowed))})")
    if kind not in allowed:
        raise ConfigError(f"unknown {name}.{key} {kind!r} (one of {', '.join(sorted(allowed))})")
    extra = set(block) - {key} - params_table[kind]
    if extra:
        raise ConfigError(f"unknown key {sorted(extra)[0]!r} in the {name} block for {key}={kind}")
    return kind


def _formats(block):
    v = block.get("formats", "csv")
    if isinstance(v, str):
        v = sorted(_FORMATS) if v == "both" else [v]
    if not isinstance(v, list) or not v:
        raise ConfigError("output.formats must be csv, vtk, both, or a nonempty list")
    bad = [f for f in v if f not in _FORMATS]
    if bad:
        raise ConfigError(f"unknown output format {bad[0]!r} (csv, vtk)")
    return tuple(sorted(set(v)))


def load_config(path):
    """Parse and validate one YAML run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if data is None:
        raise ConfigError(f"config file {path} is empty")
    data = _mapping(data, "config")

    unknown = set(data) - _TOP_BLOCKS
    if unknown:
        raise ConfigError(f"unknown config block {sorted(unknown)[0]!r}")

    geom = dict(_mapping(data.get("geometry"), "geometry"))
    if not geom:
        raise ConfigError("geometry block is required")
    preset = _variant(geom, "preset", set(_GEOMETRY_PARAMS), _GEOMETRY_PARAMS, "geometry")
    for key in _GEOMETRY_REQUIRED[preset]:
        if key not in geom:
            raise ConfigError(f"geometry.{key} is required for preset={preset}")
    if preset == "arc":
        _number(geom, "bend_radius", "geometry", required=True, lo_strict=0.0)
    if preset == "helix":
        _number(geom, "curvature", "geometry", required=True, lo=0.0)
        _number(geom, "torsion", "geometry", required=True)

    rad = dict(_mapping(data.get("radius"), "radius"))
    if not rad:
        rad = {"law": "constant"}
    law = _variant(rad, "law", set(_RADIUS_PARAMS), _RADIUS_PARAMS, "radius")
    for key in _RADIUS_PARAMS[law] - {"path"}:
        _number(rad, key, "radius")
    if law == "table" and "path" not in rad:
        raise ConfigError("radius.path is required for law=table")

    disc = _mapping(data.get("discretization"), "discretization")
    phys = _mapping(data.get("physics"), "physics")
    if not phys:
        raise ConfigError("physics block is required")
    togg = _mapping(data.get("toggles"), "toggles")
    out = _mapping(data.get("output"), "output")
    study = _mapping(data.get("study"), "study")

    h_values = study.get("h_values")
    if h_values is not None:
        if not isinstance(h_values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in h_values
        ):
            raise ConfigError("study.h_values must be a list of numbers")
        h_values = [float(v) for v in h_values]
    mesh_values = study.get("mesh_values")
    if mesh_values is not None:
        if not isinstance(mesh_values, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in mesh_values
        ):
            raise ConfigError("study.mesh_values must be a list of integers")
        if any(v < 4 for v in mesh_values):
            raise ConfigError("study.mesh_values entries must be >= 4")
    extra = set(study) - {"h_values", "mesh_values"}
    if extra:
        raise ConfigError(f"unknown key {sorted(extra)[0]!r} in the study block")

    directory = out.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory must be a nonempty string")

    return RunConfig(
        geometry=geom,
        radius=rad,
        n_s=_count(disc, "n_s", 16),
        n_theta=_count(disc, "n_theta", 32),
        n_rho=_count(disc, "n_rho", 32),
        h=_number(phys, "h", "physics", required=True, lo_strict=0.0, hi_strict=1.0),
        flow_rate=_number(phys, "flow_rate", "physics", default=1.0),
        outlet_pressure=_number(phys, "outlet_pressure", "physics", default=0.0),
        transverse=_flag(togg, "transverse", True),
        cutoff=_flag(togg, "cutoff", True),
        directory=directory,
        formats=_formats(out),
        h_values=h_values,
        mesh_values=mesh_values,
        base_dir=path.resolve().parent,
    )


def _load_table(cfg, rel_path, name):
    path = Path(rel_path)
    if not path.is_absolute():
        path = cfg.base_dir / path
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read {name} table {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"malformed {name} table {path}: {exc}") from exc
    return table


def _build_centerline(cfg, n_s):
    geom = cfg.geometry
    preset = geom["preset"]
    if preset == "straight":
        return Centerline.straight(n_s=n_s)
    if preset == "arc":
        return Centerline.circular_arc(float(geom["bend_radius"]), n_s=n_s)
    if preset == "helix":
        return Centerline.helix(float(geom["curvature"]), float(geom["torsion"]), n_s=n_s)
    points = _load_table(cfg, geom["path"], "centerline")
    if points.shape[1] != 3:
        raise ConfigError(f"centerline table must have 3 columns, got {points.shape[1]}")
    return Centerline.from_points(points, n_s=n_s)


def _build_radius(cfg, n_s, n_theta):
    rad = cfg.radius
    law = rad["law"]
    if law != "table":
        params = {k: v for k, v in rad.items() if k != "law"}
        return getattr(RadiusLaw, law)(**params)
    values = _load_table(cfg, rad["path"], "radius")
    if values.shape != (n_theta, n_s + 1):
        raise ConfigError(
            f"radius table shape {values.shape} does not match the "
            f"(n_theta, n_s+1) = ({n_theta}, {n_s + 1}) grid"
        )
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    s = np.linspace(0.0, 1.0, n_s + 1)
    return RadiusLaw.from_table(theta, s, values)


def build_geometry(cfg, h=None, n_theta=None):
    """Construct the pipe geometry a config describes.

    h and n_theta can be overridden for family studies; a tabulated radius
    is tied to its grid, so overriding n_theta then is a config error.
    """
    n_theta = cfg.n_theta if n_theta is None else n_theta
    if cfg.radius["law"] == "table" and n_theta != cfg.n_theta:
        raise ConfigError("mesh studies need an analytic radius law, not a table")
    centerline = _build_centerline(cfg, cfg.n_s)
    radius = _build_radius(cfg, cfg.n_s, n_theta)
    return PipeGeometry(centerline, radius, cfg.h if h is None else h, n_theta=n_theta)


def resolve_threads(flag_value=None):
    """Worker count: flag beats THINPIPE_THREADS beats available parallelism."""
    if flag_value is not None:
        n = flag_value
    else:
        env = os.environ.get("THINPIPE_THREADS")
        if env is None:
            return os.cpu_count() or 1
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"THINPIPE_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n
