"""Experiment configuration: TOML sections mapped onto frozen dataclasses.

An empty file yields the reference setup: six disks of radius 0.086, no
deformation, ``rho0 = kappa0 = 1``, ``rho1 = 1/50``, ``kappa1 = 50``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .lattice import MAX_RADIUS, GeometryError, build_inclusions


class ConfigError(ValueError):
    """Parse or validation failure; ``line`` is set for parse errors."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line = line
        self.field = field

    def to_dict(self) -> dict:
        return {"error": "config", "message": str(self), "line": self.line, "field": self.field}


@dataclass(frozen=True)
class Geometry:
    radius: float = 0.086
    sigma: float = 0.0


@dataclass(frozen=True)
class Materials:
    rho0: float = 1.0
    kappa0: float = 1.0
    rho1: float = 1.0 / 50.0
    kappa1: float = 50.0


@dataclass(frozen=True)
class Discretization:
    nodes: int = 64
    ewald_split: float = 4.0
    abs_tol: float = 1e-15
    grid: int = 101


@dataclass(frozen=True)
class BandPath:
    path: str = "M1,G,M2"
    samples: int = 81


@dataclass(frozen=True)
class ConeOptions:
    directions: int = 6
    t_min: float = 0.005  # in units of |k1|
    t_max: float = 0.05
    points: int = 10


@dataclass(frozen=True)
class GapOptions:
    radius: float = 0.2  # in units of |k1|
    rings: int = 4
    per_ring: int = 6


@dataclass(frozen=True)
class DispersionOptions:
    # contrast chosen so that both wavenumbers stay subwavelength
    rho0: float = 1.0
    kappa0: float = 1.0
    rho1: float = 0.02
    kappa1: float = 0.02
    nodes: int = 32
    grid: int = 200
    threshold: float = 1e-6
    alphas: tuple = ((0.0, 0.0), (0.1, 0.0), (0.08, 0.12))  # in (k1, k2) coordinates; |alpha| below the window


@dataclass(frozen=True)
class OracleOptions:
    enabled: bool = True
    cells_per_radius: float = 12.0


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: Geometry = field(default_factory=Geometry)
    materials: Materials = field(default_factory=Materials)
    discretization: Discretization = field(default_factory=Discretization)
    bands: BandPath = field(default_factory=BandPath)
    cone: ConeOptions = field(default_factory=ConeOptions)
    gap: GapOptions = field(default_factory=GapOptions)
    dispersion: DispersionOptions = field(default_factory=DispersionOptions)
    oracle: OracleOptions = field(default_factory=OracleOptions)

    @property
    def label(self) -> str:
        s = self.geometry.sigma
        return "contracted" if s < 0 else "dilated" if s > 0 else "super-honeycomb"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dispersion"]["alphas"] = [list(a) for a in self.dispersion.alphas]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_overrides(self, sigma: float | None = None, path: str | None = None) -> "ExperimentConfig":
        cfg = self
        if sigma is not None:
            cfg = dataclasses.replace(cfg, geometry=dataclasses.replace(cfg.geometry, sigma=float(sigma)))
        if path is not None:
            names, _, count = path.partition(":")
            bp = dataclasses.replace(cfg.bands, path=names, samples=int(count) if count else cfg.bands.samples)
            cfg = dataclasses.replace(cfg, bands=bp)
        validate(cfg)
        return cfg


_SECTION_TYPES = {
    "geometry": Geometry,
    "materials": Materials,
    "discretization": Discretization,
    "bands": BandPath,
    "cone": ConeOptions,
    "gap": GapOptions,
    "dispersion": DispersionOptions,
    "oracle": OracleOptions,
}


def _coerce(section: str, name: str, default, value):
    where = f"{section}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean", field=where)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer", field=where)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number", field=where)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string", field=where)
        return value
    if isinstance(default, tuple):
        try:
            out = tuple(tuple(float(c) for c in pair) for pair in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where} must be a list of [a, b] pairs", field=where) from None
        if any(len(p) != 2 for p in out):
            raise ConfigError(f"{where} must be a list of [a, b] pairs", field=where)
        return out
    raise ConfigError(f"unsupported field {where}", field=where)


def from_mapping(data: dict) -> ExperimentConfig:
    kwargs = {}
    for section, values in data.items():
        cls = _SECTION_TYPES.get(section)
        if cls is None:
            raise ConfigError(f"unknown section [{section}]", field=section)
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table", field=section)
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        args = {}
        for name, value in values.items():
            if name not in known:
                raise ConfigError(f"unknown key {section}.{name}", field=f"{section}.{name}")
            args[name] = _coerce(section, name, getattr(defaults, name), value)
        kwargs[section] = dataclasses.replace(defaults, **args)
    cfg = ExperimentConfig(**kwargs)
    validate(cfg)
    return cfg


def _positive(value, where):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{where} must be positive (got {value})", field=where)


def validate(cfg: ExperimentConfig) -> None:
    g = cfg.geometry
    _positive(g.radius, "geometry.radius")
    if g.radius >= MAX_RADIUS:
        raise ConfigError(f"geometry.radius = {g.radius} violates radius < {MAX_RADIUS}", field="geometry.radius")
    try:
        build_inclusions(g.radius, g.sigma)
    except GeometryError as exc:
        raise ConfigError(f"geometry: {exc}", field="geometry.sigma") from None
    for sec in (cfg.materials, cfg.dispersion):
        name = "materials" if sec is cfg.materials else "dispersion"
        for k in ("rho0", "kappa0", "rho1", "kappa1"):
            _positive(getattr(sec, k), f"{name}.{k}")
    d = cfg.discretization
    for n, where in ((d.nodes, "discretization.nodes"), (cfg.dispersion.nodes, "dispersion.nodes")):
        if n < 8 or n % 2:
            raise ConfigError(f"{where} must be an even integer >= 8 (got {n})", field=where)
    _positive(d.ewald_split, "discretization.ewald_split")
    _positive(d.abs_tol, "discretization.abs_tol")
    if d.grid < 3 or d.grid % 2 == 0:
        raise ConfigError("discretization.grid must be odd and >= 3 so the grid contains the origin",
                          field="discretization.grid")
    if cfg.bands.samples < 2:
        raise ConfigError("bands.samples must be >= 2", field="bands.samples")
    c = cfg.cone
    if c.directions < 3:
        raise ConfigError("cone.directions must be >= 3", field="cone.directions")
    if not 0 < c.t_min < c.t_max <= 0.1:
        raise ConfigError("cone radii must satisfy 0 < t_min < t_max <= 0.1", field="cone.t_max")
    if c.points < 2:
        raise ConfigError("cone.points must be >= 2", field="cone.points")
    _positive(cfg.gap.radius, "gap.radius")
    if cfg.gap.rings < 1 or cfg.gap.per_ring < 1:
        raise ConfigError("gap.rings and gap.per_ring must be >= 1", field="gap.rings")
    if cfg.dispersion.grid < 10:
        raise ConfigError("dispersion.grid must be >= 10", field="dispersion.grid")
    _positive(cfg.dispersion.threshold, "dispersion.threshold")
    if cfg.oracle.cells_per_radius < 8:
        raise ConfigError("oracle.cells_per_radius must be >= 8", field="oracle.cells_per_radius")


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}", line=getattr(exc, "lineno", None)) from None
    return from_mapping(data)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    return loads(p.read_text(encoding="utf-8"))
