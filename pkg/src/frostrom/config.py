"""Pipeline configuration: nested dataclasses with JSON round-tripping."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .io import config_hash
from .mesh import CaseGeometry
from .solver import SolverSettings


@dataclass
class GridConfig:
    nx: int = 70
    ny: int = 80


@dataclass
class TimeConfig:
    dt: float = 2.0
    t_final: float = 7200.0
    stride: int = 36


@dataclass
class SamplingConfig:
    seed: int = 2024
    n_train: int = 8
    n_test: int = 2

    @property
    def count(self) -> int:
        return self.n_train + self.n_test


@dataclass
class ROMConfig:
    n_max: int = 200
    subtract_mean: bool = False
    area_weighted: bool = False


@dataclass
class SensorConfig:
    pixel_size: float = 0.02
    mode: str = "unit"
    exclude_food: bool = False
    placement: str = "full"  # full | greedy | regular
    m: int | None = None


@dataclass
class EstimationConfig:
    n: int | str = "auto"


@dataclass
class PipelineConfig:
    geometry: CaseGeometry = field(default_factory=CaseGeometry)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    rom: ROMConfig = field(default_factory=ROMConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)

    def __post_init__(self):
        if self.sampling.n_train < 1 or self.sampling.n_test < 1:
            raise ValueError("need at least one training and one test run")
        if self.time.dt <= 0 or self.time.t_final < 0 or self.time.stride < 1:
            raise ValueError("time section needs dt > 0, t_final >= 0 and stride >= 1")
        n = self.estimation.n
        if not (n == "auto" or (isinstance(n, int) and n >= 1)):
            raise ValueError("estimation.n must be a positive integer or 'auto'")
        if self.sensors.placement not in ("full", "greedy", "regular"):
            raise ValueError(f"unknown placement {self.sensors.placement!r}")
        if self.sensors.placement != "full" and self.sensors.m is None:
            raise ValueError("greedy/regular placement needs sensors.m")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        sections = {
            "grid": GridConfig,
            "time": TimeConfig,
            "solver": SolverSettings,
            "sampling": SamplingConfig,
            "rom": ROMConfig,
            "sensors": SensorConfig,
            "estimation": EstimationConfig,
        }
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"config_hash"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {name: typ(**d[name]) for name, typ in sections.items() if name in d}
        if "geometry" in d:
            kwargs["geometry"] = CaseGeometry.from_dict(d["geometry"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def desk_config() -> PipelineConfig:
    """70 x 80 cells, dt = 2 s, 2 h, ~100 snapshots per run, 8 + 2 runs."""
    return PipelineConfig()


def quick_config() -> PipelineConfig:
    """Coarser 35 x 40 variant that runs the full chain in a few minutes on one core."""
    return PipelineConfig(
        grid=GridConfig(35, 40),
        time=TimeConfig(dt=10.0, t_final=7200.0, stride=6),
        rom=ROMConfig(n_max=120),
    )


def with_updates(cfg: PipelineConfig, section: str, **values) -> PipelineConfig:
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})
