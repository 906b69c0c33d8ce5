"""Run configuration: one JSON file drives the whole pipeline.

The schema (version 1) has sections ``hopf``, ``sim``, ``grid``,
``lags``, ``eigen``, ``spectral``, ``oracle`` and ``io``; every field has
a default except the output directory.  The grid lives in standardized
(zero mean, unit variance) units.  ``lags.tau`` and ``lags.dtau`` must be
integer multiples of the sampling interval ``sim.dt * sim.sample_stride``
with ``0 < dtau < tau``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .hopf import HopfParams, SimConfig
from .partition import GridSpec


@dataclass(frozen=True)
class LagSpec:
    tau: float = 4.0
    dtau: float = 0.1


@dataclass(frozen=True)
class EigenOptions:
    k: int = 15
    tol: float = 1e-9
    kappa_max: float = 5.0
    pairing_threshold: float = 0.5
    max_restarts: int = 30


@dataclass(frozen=True)
class SpectralOptions:
    max_lag: int = 400
    t_points: int | None = None
    omega_max: float | None = 2.5
    welch_segment_len: int | None = None
    welch_overlap: float = 0.5


@dataclass(frozen=True)
class OracleOptions:
    max_order: int = 3
    max_n: int = 3
    max_l: int = 2
    n_quad: int = 4096


@dataclass(frozen=True)
class IoOptions:
    output_dir: str = "out"
    stem: str = "run"
    time_unit_label: str = ""


@dataclass(frozen=True)
class RunConfig:
    hopf: HopfParams = field(default_factory=lambda: HopfParams(0.2, 1.0, 1.0, 0.05))
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-2, n_samples=1_000_000, sample_stride=10))
    grid: GridSpec = field(default_factory=lambda: GridSpec((-4.5, -4.5), (4.5, 4.5), (50, 50)))
    lags: LagSpec = field(default_factory=LagSpec)
    eigen: EigenOptions = field(default_factory=EigenOptions)
    spectral: SpectralOptions = field(default_factory=SpectralOptions)
    oracle: OracleOptions = field(default_factory=OracleOptions)
    io: IoOptions = field(default_factory=IoOptions)

    def __post_init__(self):
        interval = self.sim.sampling_interval
        for name, value in (("tau", self.lags.tau), ("dtau", self.lags.dtau)):
            steps = value / interval
            if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
                raise ConfigError(
                    f"lags.{name}={value} is not a positive integer multiple of the "
                    f"sampling interval {interval}"
                )
        if not self.lags.dtau < self.lags.tau:
            raise ConfigError("lags require dtau < tau")

    @property
    def tau_steps(self) -> int:
        return round(self.lags.tau / self.sim.sampling_interval)

    @property
    def dtau_steps(self) -> int:
        return round(self.lags.dtau / self.sim.sampling_interval)

    def to_dict(self) -> dict:
        doc = {
            "schema_version": 1,
            "hopf": asdict(self.hopf),
            "sim": asdict(self.sim),
            "grid": {
                "lo": list(self.grid.lo),
                "hi": list(self.grid.hi),
                "n_per_dim": list(self.grid.n_per_dim),
            },
            "lags": asdict(self.lags),
            "eigen": asdict(self.eigen),
            "spectral": asdict(self.spectral),
            "oracle": asdict(self.oracle),
            "io": asdict(self.io),
        }
        doc["sim"]["initial_state"] = list(self.sim.initial_state)
        return doc


_SECTIONS = {"hopf", "sim", "grid", "lags", "eigen", "spectral", "oracle", "io"}


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    version = doc.get("schema_version", 1)
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version}")
    unknown = set(doc) - _SECTIONS - {"schema_version"}
    if unknown:
        raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")

    def build(cls, section, **convert):
        data = dict(doc.get(section, {}))
        for key, fn in convert.items():
            if key in data and data[key] is not None:
                data[key] = fn(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad '{section}' section: {exc}") from exc

    try:
        return RunConfig(
            hopf=build(HopfParams, "hopf"),
            sim=build(SimConfig, "sim", initial_state=tuple),
            grid=build(GridSpec, "grid", lo=tuple, hi=tuple, n_per_dim=tuple),
            lags=build(LagSpec, "lags"),
            eigen=build(EigenOptions, "eigen"),
            spectral=build(SpectralOptions, "spectral"),
            oracle=build(OracleOptions, "oracle"),
            io=build(IoOptions, "io"),
        )
    except ConfigError:
        raise
    except Exception as exc:  # invariant violations from the section types
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
