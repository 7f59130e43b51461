"""Synthetic feature datasets with known ground truth.

Class means sit on a scaled regular simplex in feature space; each subject
adds a Gaussian offset, each epoch adds per-entry Gaussian noise. A chosen
fraction of subjects gets a corrupted stored label while their features keep
following the true class, so label-noise handling can be verified against
ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import FeatureSample, SubjectDataset


@dataclass(frozen=True)
class SynthConfig:
    channels: int = 6
    bands: int = 5
    epochs_per_subject: int = 30
    counts_per_class: tuple[int, ...] = (8, 8, 8)
    class_sep: float = 6.0
    subject_sd: float = 0.5
    epoch_sd: float = 1.0
    flip_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.channels < 1 or self.bands < 1 or self.epochs_per_subject < 1:
            raise ConfigError("channels, bands and epochs must be >= 1")
        if sum(self.counts_per_class) < 3:
            raise ConfigError("need at least 3 subjects in total")
        if any(c < 1 for c in self.counts_per_class):
            raise ConfigError("every class needs at least one subject")
        if self.class_sep <= 0:
            raise ConfigError("class_sep must be positive")
        if self.subject_sd < 0 or self.epoch_sd < 0:
            raise ConfigError("standard deviations must be >= 0")
        if not 0.0 <= self.flip_fraction < 1.0:
            raise ConfigError("flip_fraction must be in [0, 1)")
        if self.channels * self.bands < len(self.counts_per_class):
            raise ConfigError("feature dimension too small for class count")


@dataclass
class SubjectTruth:
    true_class: int
    stored_label: int
    flipped: bool


@dataclass
class SynthTruth:
    per_subject: dict[str, SubjectTruth] = field(default_factory=dict)


def simplex_means(n_classes: int, dim: int, sep: float) -> np.ndarray:
    """n points in R^dim with all pairwise distances equal to sep."""
    basis = np.eye(n_classes)
    centered = basis - basis.mean(axis=0)  # pairwise distance sqrt(2)
    means = np.zeros((n_classes, dim))
    means[:, :n_classes] = centered * (sep / np.sqrt(2.0))
    return means


def generate(cfg: SynthConfig) -> tuple[list[SubjectDataset], SynthTruth]:
    rng = np.random.default_rng(cfg.seed)
    n_classes = len(cfg.counts_per_class)
    dim = cfg.channels * cfg.bands
    means = simplex_means(n_classes, dim, cfg.class_sep)

    subject_classes = [
        c for c, count in enumerate(cfg.counts_per_class) for _ in range(count)
    ]
    total = len(subject_classes)

    n_flip = int(np.floor(cfg.flip_fraction * total))
    if n_flip > 0 and n_classes < 2:
        raise ConfigError("cannot flip labels with a single class")
    # pick flip targets, keeping at least one clean subject per class
    flip_set: set[int] = set()
    if n_flip > 0:
        per_class_flips = {c: 0 for c in range(n_classes)}
        caps = {c: cfg.counts_per_class[c] - 1 for c in range(n_classes)}
        for idx in rng.permutation(total):
            if len(flip_set) == n_flip:
                break
            c = subject_classes[idx]
            if per_class_flips[c] < caps[c]:
                flip_set.add(int(idx))
                per_class_flips[c] += 1
        if len(flip_set) < n_flip:
            raise ConfigError(
                f"cannot flip {n_flip} subjects while keeping one clean "
                "subject per class")

    subjects: list[SubjectDataset] = []
    truth = SynthTruth()
    for idx, true_c in enumerate(subject_classes):
        sid = f"sub-{idx:03d}"
        if idx in flip_set:
            others = [c for c in range(n_classes) if c != true_c]
            stored = int(others[rng.integers(len(others))])
        else:
            stored = true_c
        offset = rng.normal(0.0, cfg.subject_sd, size=dim)
        noise = rng.normal(0.0, cfg.epoch_sd,
                           size=(cfg.epochs_per_subject, dim))
        feats = (means[true_c] + offset + noise).reshape(
            cfg.epochs_per_subject, cfg.channels, cfg.bands)
        samples = [
            FeatureSample(sid, e, feats[e], stored)
            for e in range(cfg.epochs_per_subject)
        ]
        subjects.append(SubjectDataset(sid, stored, samples))
        truth.per_subject[sid] = SubjectTruth(
            true_class=true_c, stored_label=stored, flipped=stored != true_c)
    return subjects, truth


def flip_report(truth: SynthTruth) -> dict:
    """Counts of flipped/clean subjects per true class."""
    classes = sorted({t.true_class for t in truth.per_subject.values()})
    per_class = {
        c: {"flipped": 0, "clean": 0, "total": 0} for c in classes
    }
    for t in truth.per_subject.values():
        row = per_class[t.true_class]
        row["total"] += 1
        row["flipped" if t.flipped else "clean"] += 1
    return {
        "per_class": per_class,
        "flipped_total": sum(r["flipped"] for r in per_class.values()),
        "clean_total": sum(r["clean"] for r in per_class.values()),
    }


def write_truth(truth: SynthTruth, path: str | Path) -> None:
    payload = {
        sid: {"true_class": t.true_class, "stored_label": t.stored_label,
              "flipped": t.flipped}
        for sid, t in sorted(truth.per_subject.items())
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_truth(path: str | Path) -> SynthTruth:
    payload = json.loads(Path(path).read_text())
    truth = SynthTruth()
    for sid, row in payload.items():
        truth.per_subject[sid] = SubjectTruth(
            true_class=row["true_class"], stored_label=row["stored_label"],
            flipped=row["flipped"])
    return truth
