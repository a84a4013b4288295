"""Experiment configuration: YAML schema, validation and unit conversions.

Core modules take SI units only; dBm-to-watts and noise-density conversions
happen here.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .channel import CommParams, DeviceProfile, path_loss_variance
from .learning import (
    LearningTask,
    StepSchedule,
    make_logistic_task,
    make_quadratic_task,
)
from .simulator import POLICIES


class ConfigError(ValueError):
    """Configuration file could not be parsed or validated."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def noise_power_watts(noise_density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Total noise power over the signal bandwidth, in watts."""
    return dbm_to_watts(noise_density_dbm_hz + 10.0 * math.log10(bandwidth_hz))


class DeviceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    size: int = Field(ge=1)
    power_dbm: float = 24.0
    distance_km: float | None = Field(default=None, gt=0)
    variance: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _one_of_distance_or_variance(self) -> "DeviceConfig":
        if (self.distance_km is None) == (self.variance is None):
            raise ValueError("give exactly one of distance_km or variance")
        return self

    def channel_variance(self) -> float:
        if self.variance is not None:
            return self.variance
        return path_loss_variance(self.distance_km)


class CommConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bandwidth_hz: float = Field(default=1e6, gt=0)
    noise_density_dbm_hz: float = -174.0
    bits_per_param: int = Field(default=16, ge=1)
    num_params: int = Field(default=1_000_000, ge=1)
    gain_threshold: float = Field(default=1e-15, gt=0)
    broadcast_time_s: float = Field(default=0.0, ge=0)


class TaskConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str = "quadratic"
    dim: int = Field(default=8, ge=1)
    heterogeneity: float = Field(default=1.0, ge=0)
    label_skew: float = Field(default=0.5, ge=0, le=1)
    l2_reg: float = Field(default=0.1, gt=0)
    batch_size: int | None = Field(default=None, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _known_kind(self) -> "TaskConfig":
        if self.kind not in ("quadratic", "logistic"):
            raise ValueError(f"task kind must be quadratic or logistic, got {self.kind!r}")
        return self


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    chi: float = Field(default=1.0, gt=0)
    nu: float = Field(default=4.0, ge=0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    devices: list[DeviceConfig] = Field(min_length=1)
    comm: CommConfig = CommConfig()
    task: TaskConfig = TaskConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    epsilon: float = Field(default=1e-3, gt=0)
    max_rounds: int = Field(default=10_000, ge=1)
    policies: list[str] = Field(default=list(POLICIES), min_length=1)
    seeds: list[int] = Field(default=[0], min_length=1)
    ica_beta: float = Field(default=0.01, ge=0)
    checkpoints: list[float] | None = None
    out_dir: str = "results"

    @model_validator(mode="after")
    def _known_policies(self) -> "ExperimentConfig":
        for p in self.policies:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}; expected one of {POLICIES}")
        return self


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except Exception as exc:  # pydantic ValidationError carries field paths
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return parse_config(data)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.model_dump(), sort_keys=False)


def build_devices(config: ExperimentConfig) -> list[DeviceProfile]:
    return [
        DeviceProfile(
            dataset_size=d.size,
            channel_variance=d.channel_variance(),
            transmit_power_w=dbm_to_watts(d.power_dbm),
            distance_km=d.distance_km,
        )
        for d in config.devices
    ]


def build_comm(config: ExperimentConfig) -> CommParams:
    c = config.comm
    return CommParams(
        bandwidth_hz=c.bandwidth_hz,
        bits_per_param=c.bits_per_param,
        num_params=c.num_params,
        noise_power_w=noise_power_watts(c.noise_density_dbm_hz, c.bandwidth_hz),
        gain_threshold=c.gain_threshold,
        broadcast_time_s=c.broadcast_time_s,
    )


def build_task(config: ExperimentConfig) -> LearningTask:
    t = config.task
    sizes = [d.size for d in config.devices]
    rng = np.random.default_rng(t.seed)
    if t.kind == "quadratic":
        return make_quadratic_task(t.dim, sizes, t.heterogeneity, rng)
    return make_logistic_task(t.dim, sizes, t.label_skew, t.l2_reg, rng)


def build_schedule(config: ExperimentConfig) -> StepSchedule:
    return StepSchedule(chi=config.schedule.chi, nu=config.schedule.nu)
