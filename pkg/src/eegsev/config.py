"""Flat key = value run-configuration files, with CLI flag overrides.

Lines are `key = value`; blank lines and `#` comments are ignored. Values
are strings here; typed construction of TrainConfig / SynthConfig happens
in the builders below, which report the offending key on error.
"""

from __future__ import annotations

from pathlib import Path

from .confidence import ConfidenceConfig
from .errors import ConfigError
from .features import BDI, PHQ9, level_names
from .model import CLASSIFICATION, ModelConfig
from .penalty import MINORITY_DEFAULTS, PenaltyConfig
from .synth import SynthConfig
from .training import TrainConfig


def parse_kv_file(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _typed(kv: dict[str, str], key: str, cast, default):
    if key not in kv:
        return default
    raw = kv[key]
    try:
        if cast is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: bad value {raw!r}") from exc


def _parse_minority(raw: str, scale: str) -> frozenset[int]:
    names = {name.lower(): i for i, name in enumerate(level_names(scale))}
    out = set()
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lstrip("-").isdigit():
            out.add(int(token))
        elif token.lower() in names:
            out.add(names[token.lower()])
        else:
            raise ConfigError(f"unknown minority class {token!r}")
    return frozenset(out)


def build_train_config(
    kv: dict[str, str],
    channels: int,
    classes: int,
    bands: int = 5,
) -> TrainConfig:
    """TrainConfig from a parsed key/value map plus data-derived dimensions."""
    scale = kv.get("scale", PHQ9)
    if scale not in (PHQ9, BDI):
        raise ConfigError(f"unknown scale {scale!r}")

    conf = ConfidenceConfig(
        u_rate=_typed(kv, "u_rate", float, 0.5),
        conf_start_fraction=_typed(kv, "conf_start_fraction", float, 0.5),
        max_stat=_typed(kv, "max_stat", float, ConfidenceConfig().max_stat),
        max_theo=_typed(kv, "max_theo", float, ConfidenceConfig().max_theo),
    )
    if "minority_classes" in kv:
        minority = _parse_minority(kv["minority_classes"], scale)
    else:
        minority = MINORITY_DEFAULTS[scale]
    minority = frozenset(c for c in minority if c < classes)
    pen = PenaltyConfig(
        minority_classes=minority,
        max_norm=_typed(kv, "penalty_max_norm", float, conf.max_stat),
        clamp=_typed(kv, "penalty_clamp", bool, PenaltyConfig().clamp),
    )
    model = ModelConfig(
        channels=channels,
        bands=bands,
        hidden=_typed(kv, "hidden", int, 8),
        classes=classes,
        domains=_typed(kv, "domains", int, 2),
        grl_lambda=_typed(kv, "grl_lambda", float, 0.1),
        head_mode=kv.get("head_mode", CLASSIFICATION),
        seed=_typed(kv, "seed", int, 0),
    )
    return TrainConfig(
        model=model,
        confidence=conf,
        penalty=pen,
        total_epochs=_typed(kv, "total_epochs", int, 100),
        learning_rate=_typed(kv, "learning_rate", float, 0.05),
        momentum=_typed(kv, "momentum", float, 0.9),
        enable_confidence=_typed(kv, "enable_confidence", bool, True),
        enable_penalty=_typed(kv, "enable_penalty", bool, True),
        seed=_typed(kv, "seed", int, 0),
        score_scale=_typed(kv, "score_scale", float, 27.0),
    )


def build_synth_config(kv: dict[str, str]) -> SynthConfig:
    counts_raw = kv.get("counts_per_class", "8,8,8")
    try:
        counts = tuple(int(t.strip()) for t in counts_raw.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad counts_per_class {counts_raw!r}") from exc
    return SynthConfig(
        channels=_typed(kv, "channels", int, 6),
        bands=_typed(kv, "bands", int, 5),
        epochs_per_subject=_typed(kv, "epochs_per_subject", int, 30),
        counts_per_class=counts,
        class_sep=_typed(kv, "class_sep", float, 6.0),
        subject_sd=_typed(kv, "subject_sd", float, 0.5),
        epoch_sd=_typed(kv, "epoch_sd", float, 1.0),
        flip_fraction=_typed(kv, "flip_fraction", float, 0.0),
        seed=_typed(kv, "seed", int, 0),
    )


def train_config_to_dict(cfg: TrainConfig) -> dict:
    """JSON-serializable echo of a TrainConfig."""
    return {
        "total_epochs": cfg.total_epochs,
        "learning_rate": cfg.learning_rate,
        "momentum": cfg.momentum,
        "enable_confidence": cfg.enable_confidence,
        "enable_penalty": cfg.enable_penalty,
        "seed": cfg.seed,
        "score_scale": cfg.score_scale,
        "confidence": {
            "u_rate": cfg.confidence.u_rate,
            "conf_start_fraction": cfg.confidence.conf_start_fraction,
            "max_stat": cfg.confidence.max_stat,
            "max_theo": cfg.confidence.max_theo,
        },
        "penalty": {
            "minority_classes": sorted(cfg.penalty.minority_classes),
            "max_norm": cfg.penalty.max_norm,
            "clamp": cfg.penalty.clamp,
        },
        "model": {
            "channels": cfg.model.channels,
            "bands": cfg.model.bands,
            "hidden": cfg.model.hidden,
            "classes": cfg.model.classes,
            "domains": cfg.model.domains,
            "grl_lambda": cfg.model.grl_lambda,
            "head_mode": cfg.model.head_mode,
            "seed": cfg.model.seed,
        },
    }
