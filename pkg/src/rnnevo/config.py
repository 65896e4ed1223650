"""Layered run configuration: dataclass defaults, a YAML file, then overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .islands import ExtinctionPolicy
from .neat import NeatConfig
from .operators import EvoConfig
from .runtime import TrainConfig

STRATEGIES = ("baseline_islands", "extinction", "neat")


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "synthetic"
    paths: list[str] = field(default_factory=list)
    input_columns: list[str] | None = None
    output_column: str = "y"
    split_fraction: float = 0.8
    normalization: str = "minmax"
    time_offset: int = 1
    synthetic_kind: str = "sine_mix"
    length: int = 300
    noise: float = 0.0
    synthetic_seed: int = 0

    def __post_init__(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.paths:
            raise ConfigError("data.paths is required when data.source is 'csv'")

    def load(self):
        from .data import load_csv, synthetic_series
        if self.source == "synthetic":
            return synthetic_series(self.synthetic_kind, self.length, self.noise,
                                    self.synthetic_seed, self.split_fraction, self.time_offset)
        return load_csv(self.paths, self.output_column, self.input_columns, self.split_fraction,
                        self.normalization, self.time_offset)


@dataclass
class RunConfig:
    strategy: str = "baseline_islands"
    n_islands: int = 10
    island_capacity: int = 10
    genome_budget: int = 20000
    worker_count: int = 1
    rng_seed: int = 0
    extinction: ExtinctionPolicy = field(default_factory=ExtinctionPolicy)
    neat: NeatConfig = field(default_factory=NeatConfig)
    evolution: EvoConfig = field(default_factory=EvoConfig)
    training: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.n_islands < 1 or self.island_capacity < 1:
            raise ConfigError("n_islands and island_capacity must be >= 1")
        if self.genome_budget < self.n_islands * self.island_capacity:
            raise ConfigError("genome_budget must be at least n_islands * island_capacity")
        if self.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")


@dataclass
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    data: DataConfig = field(default_factory=DataConfig)
    # grid repeats; `run` executes a single trial unless --repeats is given
    repeats: int = 20
    label: str = ""

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")


def to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (frozenset, set)):
        return sorted(to_plain(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    return obj


def _build(cls, values: dict | None, where: str):
    values = dict(values or {})
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in values.items():
        if cls is EvoConfig and key in ("recurrent_skip_range", "crossover_r_range"):
            value = tuple(value)
        if cls is EvoConfig and key == "enabled_mutations":
            value = frozenset(value)
        if cls is EvoConfig and key == "node_kind_pool":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def from_plain(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    run = dict(data.pop("run", {}) or {})
    nested = {
        "extinction": _build(ExtinctionPolicy, run.pop("extinction", None), "run.extinction"),
        "neat": _build(NeatConfig, run.pop("neat", None), "run.neat"),
        "evolution": _build(EvoConfig, run.pop("evolution", None), "run.evolution"),
        "training": _build(TrainConfig, run.pop("training", None), "run.training"),
    }
    run_cfg = _build(RunConfig, {**run, **nested}, "run")
    data_cfg = _build(DataConfig, data.pop("data", None), "data")
    rest = {k: data.pop(k) for k in ("repeats", "label") if k in data}
    if data:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(data))}")
    return ExperimentConfig(run_cfg, data_cfg, **rest)


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    plain = to_plain(ExperimentConfig())
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        plain = deep_merge(plain, loaded)
    if overrides:
        plain = deep_merge(plain, overrides)
    return from_plain(plain)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_plain(cfg), sort_keys=False)
