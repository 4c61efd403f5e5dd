"""Strict experiment configuration (JSON).

Every section is a dataclass; unknown keys are rejected with the dotted path of
the offending field, and the fully defaulted config is what gets hashed and
written into manifests.
"""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .functionals import ZETAS
from .grid import Grid
from .io import config_hash
from .materials import Bump, Illumination, MaterialParams, ScalarSpec

METHOD_ZETA = {"method1": "zeta1", "method2": "zeta2", "electroseismic": "zeta3"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BumpConfig:
    center: tuple = (0.5, 0.5, 0.5)
    width: float = 0.3
    amplitude: float = 0.1


@dataclass(frozen=True)
class ScalarConfig:
    base: float = 1.0
    bumps: tuple = ()        # of BumpConfig

    def spec(self) -> ScalarSpec:
        return ScalarSpec(self.base, tuple(Bump(tuple(b.center), b.width, b.amplitude) for b in self.bumps))


@dataclass(frozen=True)
class MaterialsConfig:
    mu: ScalarConfig = ScalarConfig()
    eps: ScalarConfig = ScalarConfig()
    sigma: ScalarConfig = ScalarConfig()
    L: ScalarConfig | None = None


@dataclass(frozen=True)
class FrequencyConfig:
    k_min: float = 0.5
    k_max: float = 2.0
    n_samples: int = 8


@dataclass(frozen=True)
class NoiseConfig:
    level: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class CoverConfig:
    max_size: int = 4
    min_gain: float = 0.05
    target_s: float | None = None


@dataclass(frozen=True)
class ReconstructionConfig:
    method: str = "method1"
    seed_cell: tuple | None = None          # full-grid cell index; default: centre cell
    seed_values: str | dict = "truth"       # "truth" or {"eps", "sigma"} / {"L"}
    illumination_indices: tuple | None = None
    presmooth: float = 0.0                  # Gaussian width in cells for noisy data; 0 = off


@dataclass(frozen=True)
class SolverConfig:
    method: str = "auto"
    tol: float = 1e-10
    workers: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 16
    margin: int = 2
    materials: MaterialsConfig = MaterialsConfig()
    frequencies: FrequencyConfig = FrequencyConfig()
    zeta: str = "zeta1"
    illuminations: tuple = ("e1", "e2", "e3")
    noise: NoiseConfig = NoiseConfig()
    cover: CoverConfig = CoverConfig()
    reconstruction: ReconstructionConfig = ReconstructionConfig()
    solver: SolverConfig = SolverConfig()
    output: str | None = None

    def __post_init__(self):
        if self.n < 2 * self.margin + 3:
            raise ConfigError(f"n: grid too small for margin {self.margin} (need n >= {2 * self.margin + 3})")
        if self.zeta not in ZETAS:
            raise ConfigError(f"zeta: unknown id {self.zeta!r} (choose from {sorted(ZETAS)})")
        b = ZETAS[self.zeta].b
        if len(self.illuminations) != b:
            raise ConfigError(f"illuminations: {self.zeta} needs {b} illuminations, got {len(self.illuminations)}")
        for s in self.illuminations:
            try:
                Illumination.parse(s)
            except Exception as exc:  # noqa: BLE001
                raise ConfigError(f"illuminations: cannot parse {s!r}: {exc}") from exc
        r = self.reconstruction
        if r.method not in METHOD_ZETA:
            raise ConfigError(f"reconstruction.method: unknown {r.method!r}")
        if r.illumination_indices is not None:
            if len(r.illumination_indices) != ZETAS[METHOD_ZETA[r.method]].b:
                raise ConfigError("reconstruction.illumination_indices: wrong count for the method")
            if any(not 0 <= i < b for i in r.illumination_indices):
                raise ConfigError("reconstruction.illumination_indices: index out of range")
        if r.method == "electroseismic" and self.materials.L is None:
            raise ConfigError("materials.L: required for the electroseismic method")
        if r.seed_cell is not None:
            if len(r.seed_cell) != 3 or any(not self.margin <= c < self.n - self.margin for c in r.seed_cell):
                raise ConfigError(f"reconstruction.seed_cell: {r.seed_cell} is outside the interior band")
        if isinstance(r.seed_values, str) and r.seed_values != "truth":
            raise ConfigError("reconstruction.seed_values: expected 'truth' or a mapping")
        if r.presmooth < 0:
            raise ConfigError("reconstruction.presmooth: must be >= 0")
        if self.noise.level < 0:
            raise ConfigError("noise.level: must be >= 0")

    # -- derived objects ---------------------------------------------------
    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.margin)

    def material_params(self) -> MaterialParams:
        m = self.materials
        return MaterialParams.from_specs(self.grid, m.mu.spec(), m.eps.spec(), m.sigma.spec())

    def L_field(self):
        return None if self.materials.L is None else self.materials.L.spec().sample(self.grid)

    def illumination_objects(self):
        return tuple(Illumination.parse(s) for s in self.illuminations)

    @property
    def seed_cell(self) -> tuple:
        return tuple(self.reconstruction.seed_cell or (self.n // 2,) * 3)

    def to_dict(self) -> dict:
        return _to_plain(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def problem_hash(self) -> str:
        """Hash of everything that determines the forward data (not reconstruction or output choices)."""
        d = self.to_dict()
        for k in ("reconstruction", "output", "cover"):
            d.pop(k)
        d["solver"].pop("workers")
        return config_hash(d)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


_NESTED = {
    (ScalarConfig, "bumps"): BumpConfig,
}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path + '.' if path else ''}{unknown[0]}: unknown key")
    kw = {}
    for name, value in data.items():
        where = f"{path}.{name}" if path else name
        hint = hints[name]
        sub = _dataclass_in(hint)
        if sub is not None and value is not None:
            kw[name] = _build(sub, value, where)
        elif (cls, name) in _NESTED:
            if not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list")
            kw[name] = tuple(_build(_NESTED[(cls, name)], v, f"{where}[{i}]") for i, v in enumerate(value))
        elif isinstance(value, list):
            kw[name] = tuple(value)
        else:
            kw[name] = value
    try:
        return cls(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def _dataclass_in(hint):
    if dataclasses.is_dataclass(hint):
        return hint
    for a in typing.get_args(hint):
        if dataclasses.is_dataclass(a):
            return a
    return None


def from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(data)
