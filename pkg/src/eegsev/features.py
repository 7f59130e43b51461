"""Differential-entropy feature extraction from raw multichannel EEG.

Raw recordings are sliced into fixed-length epochs, each epoch is band-pass
filtered into five conventional EEG bands, and every (channel, band) series
is summarized by its differential entropy under a Gaussian assumption:

    DE = 0.5 * ln(2 * pi * e * var)

Questionnaire scores (PHQ-9 or BDI) map to severity class labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sp_signal

from .errors import ConfigError, DataError

PHQ9 = "PHQ9"
BDI = "BDI"

# (low, high] score ranges per scale, in class-index order starting at 0.
PHQ9_LEVELS = [
    ("Normal", 0, 4),
    ("Mild", 5, 9),
    ("Moderate", 10, 14),
    ("ModerateToMajor", 15, 19),
    ("Major", 20, 27),
]
BDI_LEVELS = [
    ("Normal", 0, 13),
    ("Mild", 14, 19),
    ("Moderate", 20, 28),
    ("Major", 29, 63),
]

# Variance floor keeps DE finite on flat segments.
VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class BandSpec:
    name: str
    low_hz: float
    high_hz: float

    def validate(self, fs: float) -> None:
        if not (0.0 < self.low_hz < self.high_hz < fs / 2.0):
            raise ConfigError(
                f"band {self.name!r} ({self.low_hz}-{self.high_hz} Hz) invalid "
                f"for sample rate {fs} Hz"
            )


DEFAULT_BANDS = (
    BandSpec("delta", 1.0, 4.0),
    BandSpec("theta", 4.0, 8.0),
    BandSpec("alpha", 8.0, 13.0),
    BandSpec("beta", 13.0, 30.0),
    BandSpec("gamma", 30.0, 50.0),
)


@dataclass
class RawRecording:
    subject_id: str
    sample_rate_hz: float
    signal: np.ndarray  # channels x time-samples, microvolts
    score: int | None = None
    scale: str = PHQ9

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise DataError("sample_rate_hz must be positive")
        if self.signal.ndim != 2 or self.signal.shape[0] < 1:
            raise DataError("signal must be a channels x samples matrix")
        if self.signal.shape[1] < 2 * self.sample_rate_hz:
            raise DataError(
                f"recording {self.subject_id!r} shorter than one 2-second epoch"
            )
        if self.scale not in (PHQ9, BDI):
            raise DataError(f"unknown scale {self.scale!r}")


@dataclass
class FeatureSample:
    subject_id: str
    epoch_index: int
    features: np.ndarray  # channels x bands, nats
    label: int


@dataclass
class SubjectDataset:
    subject_id: str
    label: int
    samples: list[FeatureSample] = field(default_factory=list)
    score: int | None = None

    def __post_init__(self):
        if not self.samples:
            raise DataError(f"subject {self.subject_id!r} has no samples")
        for s in self.samples:
            if s.subject_id != self.subject_id or s.label != self.label:
                raise DataError(
                    f"sample {s.epoch_index} of {self.subject_id!r} has "
                    "inconsistent id or label"
                )

    def feature_array(self) -> np.ndarray:
        """All epochs stacked as (epochs, channels, bands); cached."""
        cached = getattr(self, "_feature_cache", None)
        if cached is None or len(cached) != len(self.samples):
            cached = np.stack([s.features for s in self.samples])
            object.__setattr__(self, "_feature_cache", cached)
        return cached


def class_count(scale: str) -> int:
    return len(PHQ9_LEVELS) if scale == PHQ9 else len(BDI_LEVELS)


def level_names(scale: str) -> list[str]:
    table = PHQ9_LEVELS if scale == PHQ9 else BDI_LEVELS
    return [name for name, _, _ in table]


def level_from_score(score: int, scale: str) -> int:
    """Map a questionnaire score to its severity class index."""
    table = {PHQ9: PHQ9_LEVELS, BDI: BDI_LEVELS}.get(scale)
    if table is None:
        raise ConfigError(f"unknown scale {scale!r}")
    for idx, (_, low, high) in enumerate(table):
        if low <= score <= high:
            return idx
    raise DataError(f"score {score} out of range for scale {scale}")


def slice_epochs(rec: RawRecording, window_s: float = 2.0) -> list[np.ndarray]:
    """Cut the recording into non-overlapping windows; remainder dropped."""
    win = window_s * rec.sample_rate_hz
    if win <= 0 or abs(win - round(win)) > 1e-9:
        raise ConfigError(
            f"window {window_s}s at {rec.sample_rate_hz} Hz is not a whole "
            "number of samples"
        )
    win = int(round(win))
    n = rec.signal.shape[1] // win
    if n == 0:
        raise DataError(f"recording {rec.subject_id!r} shorter than one window")
    return [rec.signal[:, i * win:(i + 1) * win].copy() for i in range(n)]


def _band_sos(band: BandSpec, fs: float) -> np.ndarray:
    band.validate(fs)
    return sp_signal.butter(
        2, [band.low_hz, band.high_hz], btype="bandpass", fs=fs, output="sos"
    )


def bandpass_filter(epoch: np.ndarray, band: BandSpec, fs: float) -> np.ndarray:
    """Zero-phase 4th-order band-pass of each channel."""
    sos = _band_sos(band, fs)
    return sp_signal.sosfiltfilt(sos, np.asarray(epoch, dtype=np.float64), axis=-1)


def differential_entropy(series: np.ndarray) -> float:
    """DE (nats) of a band-limited series under a Gaussian assumption."""
    series = np.asarray(series, dtype=np.float64).ravel()
    if series.size < 2:
        raise DataError("differential entropy needs at least 2 samples")
    var = float(np.var(series, ddof=1))
    return 0.5 * float(np.log(2.0 * np.pi * np.e * max(var, VAR_FLOOR)))


def extract_features(
    rec: RawRecording,
    bands: tuple[BandSpec, ...] = DEFAULT_BANDS,
    window_s: float = 2.0,
) -> SubjectDataset:
    """One channels x bands DE tensor per epoch, labeled from the score."""
    if len(bands) != 5:
        raise ConfigError(f"expected 5 bands, got {len(bands)}")
    if rec.score is None:
        raise DataError(f"recording {rec.subject_id!r} has no score to label")
    label = level_from_score(rec.score, rec.scale)
    sos_per_band = [_band_sos(b, rec.sample_rate_hz) for b in bands]

    # Filter the whole recording, then slice: per-window filtering of short
    # epochs inflates narrow-band variance through edge transients.
    win = int(round(window_s * rec.sample_rate_hz))
    n_epochs = len(slice_epochs(rec, window_s))
    channels = rec.signal.shape[0]
    feats = np.empty((n_epochs, channels, len(bands)), dtype=np.float64)
    for b, sos in enumerate(sos_per_band):
        filtered = sp_signal.sosfiltfilt(sos, rec.signal, axis=-1)
        for idx in range(n_epochs):
            seg = filtered[:, idx * win:(idx + 1) * win]
            var = np.var(seg, axis=-1, ddof=1)
            feats[idx, :, b] = 0.5 * np.log(
                2.0 * np.pi * np.e * np.maximum(var, VAR_FLOOR)
            )
    samples = [
        FeatureSample(rec.subject_id, idx, feats[idx], label)
        for idx in range(n_epochs)
    ]
    return SubjectDataset(rec.subject_id, label, samples, score=rec.score)
