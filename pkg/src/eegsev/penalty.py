"""Minority-sample penalty weights.

A penalty fires when a subject from a designated minority class is
misclassified at the subject level; its weight is the smoothed error norm
scaled by a fixed normalizer,

    val_pen = NeL2 / max_norm,

so the worse the current fit, the stronger the emphasis on the subject.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .confidence import MAX_STAT_DEFAULT
from .errors import ConfigError, DataError

# Table-driven defaults for the two questionnaire scales: classes whose
# subject counts are small in the source cohorts.
MINORITY_DEFAULTS = {
    "PHQ9": frozenset({1, 2}),      # Mild, Moderate
    "BDI": frozenset({1, 2, 3}),    # Mild, Moderate, Major
}


@dataclass(frozen=True)
class PenaltyConfig:
    minority_classes: frozenset[int] = frozenset()
    max_norm: float = MAX_STAT_DEFAULT
    clamp: bool = True  # cap val_pen at 1.0

    def __post_init__(self):
        if self.max_norm <= 0:
            raise ConfigError("max_norm must be positive")
        if any(c < 0 for c in self.minority_classes):
            raise ConfigError("minority class indices must be >= 0")


def penalty_triggered(true_class: int, predicted_class: int,
                      cfg: PenaltyConfig) -> bool:
    """True iff a minority-class subject was misclassified."""
    if true_class < 0 or predicted_class < 0:
        raise DataError("class indices must be >= 0")
    return true_class in cfg.minority_classes and predicted_class != true_class


def penalty_value(NeL2: float, cfg: PenaltyConfig) -> float:
    """NeL2-proportional penalty weight."""
    if NeL2 < 0:
        raise DataError("NeL2 must be >= 0")
    val = NeL2 / cfg.max_norm
    return min(val, 1.0) if cfg.clamp else val
