"""Training-emission estimate and max-norm inversion of cost counters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NormalizationError
from .model import CostProfile, TrainingStats


@dataclass(frozen=True)
class EmissionContext:
    device_power_watts: float = 300.0
    pue: float = 1.58
    carbon_intensity_kg_per_kwh: float = 0.432
    region_label: str = "configurable"
    # Sustained throughput used by the modeled clock; see training_seconds().
    device_flops_per_second: float = 1e9

    def __post_init__(self):
        if self.device_power_watts <= 0 or self.carbon_intensity_kg_per_kwh <= 0:
            raise ConfigurationError("device power and carbon intensity must be positive")
        if self.pue < 1:
            raise ConfigurationError("PUE must be >= 1")
        if self.device_flops_per_second <= 0:
            raise ConfigurationError("device_flops_per_second must be positive")


@dataclass
class SustainabilityReport:
    kg_co2e: float
    training_seconds: float
    clock: str
    cost: CostProfile
    normalized: dict[str, float] | None = None


def estimate_co2e(training_stats: TrainingStats | float, ctx: EmissionContext) -> float:
    """kg CO2e = kW * hours * PUE * kg/kWh.

    Accepts a :class:`TrainingStats` (its wall-clock seconds are used) or a
    duration in seconds.
    """
    seconds = (training_stats.wall_clock_seconds if isinstance(training_stats, TrainingStats)
               else float(training_stats))
    if seconds < 0:
        raise ConfigurationError("training time must be nonnegative")
    return (ctx.device_power_watts / 1000.0) * (seconds / 3600.0) * ctx.pue * ctx.carbon_intensity_kg_per_kwh


def modeled_training_seconds(stats: TrainingStats, cost: CostProfile, ctx: EmissionContext) -> float:
    """Deterministic training duration: epochs * rows * 3 forward-equivalents / throughput."""
    flops = stats.epochs_run * stats.train_rows * 3 * cost.flops_per_forward
    return flops / ctx.device_flops_per_second


def training_seconds(stats: TrainingStats, cost: CostProfile, ctx: EmissionContext, clock: str) -> float:
    if clock == "measured":
        return stats.wall_clock_seconds
    if clock == "modeled":
        return modeled_training_seconds(stats, cost, ctx)
    raise ConfigurationError(f"unknown clock {clock!r}")


def max_norm_invert(values) -> tuple[np.ndarray, bool]:
    """``1 - v / max(v)``; returns ``(scores, all_zero_flag)``.

    An all-zero pool scores 1 everywhere and sets the flag.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise NormalizationError("max_norm_invert needs a nonempty vector")
    if not np.all(np.isfinite(v)):
        raise NormalizationError("max_norm_invert received non-finite values")
    if np.any(v < 0):
        raise NormalizationError(f"max_norm_invert needs nonnegative values, got min {v.min()}")
    top = v.max()
    if top == 0:
        return np.ones_like(v), True
    scores = 1.0 - v / top
    scores[v == top] = 0.0
    return np.clip(scores, 0.0, 1.0), False
