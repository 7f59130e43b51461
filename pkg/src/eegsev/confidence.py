"""Per-subject confidence tracking from smoothed prediction-error norms.

Each epoch a subject's prediction error is summarized by the L2 norm of
(predicted probabilities - one-hot label), averaged over its epochs. The
norm is smoothed across epochs,

    NeL2 = LeL2 - u_rate * (LeL2 - eL2),

and mapped to a confidence in [0, 1] against a statistical maximum, with
the theoretical maximum (sqrt 2) as fallback normalizer when NeL2 exceeds
the statistical one. Confidence only starts steering training after a
configurable fraction of the epochs has elapsed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

MAX_THEO_DEFAULT = math.sqrt(2.0)
MAX_STAT_DEFAULT = 0.8 * MAX_THEO_DEFAULT


@dataclass(frozen=True)
class ConfidenceConfig:
    u_rate: float = 0.5
    conf_start_fraction: float = 0.5
    max_stat: float = MAX_STAT_DEFAULT
    max_theo: float = MAX_THEO_DEFAULT

    def __post_init__(self):
        if not 0.0 <= self.u_rate <= 1.0:
            raise ConfigError("u_rate must be in [0, 1]")
        if not 0.0 <= self.conf_start_fraction <= 1.0:
            raise ConfigError("conf_start_fraction must be in [0, 1]")
        if self.max_stat <= 0 or self.max_theo <= 0:
            raise ConfigError("norm maxima must be positive")
        if self.max_stat > self.max_theo:
            raise ConfigError("max_stat cannot exceed max_theo")


@dataclass
class SubjectConfidence:
    LeL2: float
    NeL2: float
    val_conf: float


@dataclass
class ConfidenceState:
    per_subject: dict[str, SubjectConfidence] = field(default_factory=dict)
    fallback_count: int = 0  # times NeL2 exceeded max_stat

    def val_conf(self, subject_id: str) -> float:
        return self.per_subject[subject_id].val_conf

    def nel2(self, subject_id: str) -> float:
        return self.per_subject[subject_id].NeL2


def sample_el2(pred: np.ndarray, label: int) -> float:
    """L2 norm of the prediction-error vector for one sample."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim != 1 or np.any(pred < -1e-9) or abs(pred.sum() - 1.0) > 1e-6:
        raise DataError("pred must be a probability distribution")
    if not 0 <= label < pred.size:
        raise DataError(f"label {label} out of range for {pred.size} classes")
    err = pred.copy()
    err[label] -= 1.0
    return float(np.linalg.norm(err))


def subject_el2(per_sample_el2: list[float]) -> float:
    """Mean per-sample error norm over a subject's epochs."""
    if not len(per_sample_el2):
        raise DataError("no per-sample error norms")
    return float(np.mean(per_sample_el2))


def update_nel2(LeL2: float, el2: float, u_rate: float) -> float:
    """Smoothed update toward the current epoch's error norm."""
    if not 0.0 <= u_rate <= 1.0:
        raise ConfigError("u_rate must be in [0, 1]")
    return LeL2 - u_rate * (LeL2 - el2)


def confidence_value(NeL2: float, cfg: ConfidenceConfig) -> tuple[float, bool]:
    """Confidence in [0, 1]; returns (value, used_theoretical_fallback)."""
    if NeL2 < 0:
        raise DataError("NeL2 must be >= 0")
    if NeL2 <= cfg.max_stat:
        val, fallback = 1.0 - NeL2 / cfg.max_stat, False
    else:
        val, fallback = 1.0 - NeL2 / cfg.max_theo, True
    return min(max(val, 0.0), 1.0), fallback


def confidence_active(epoch: int, total_epochs: int, cfg: ConfidenceConfig) -> bool:
    if not 0 <= epoch < total_epochs:
        raise DataError(f"epoch {epoch} outside [0, {total_epochs})")
    return epoch >= math.floor(cfg.conf_start_fraction * total_epochs)


def epoch_update(
    state: ConfidenceState, subject_id: str, el2: float, cfg: ConfidenceConfig
) -> ConfidenceState:
    """Advance one subject's smoothed norm and confidence by one epoch."""
    if el2 < 0:
        raise DataError("el2 must be >= 0")
    prev = state.per_subject.get(subject_id)
    LeL2 = el2 if prev is None else prev.NeL2  # first update seeds LeL2 = el2
    NeL2 = update_nel2(LeL2, el2, cfg.u_rate)
    val_conf, fallback = confidence_value(NeL2, cfg)
    state.per_subject[subject_id] = SubjectConfidence(NeL2, NeL2, val_conf)
    if fallback:
        state.fallback_count += 1
    return state
