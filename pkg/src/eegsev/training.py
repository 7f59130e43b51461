"""Weighted training loop and leave-one-subject-out evaluation.

Every epoch each training subject is processed once (seed-shuffled order):
its samples are forwarded, its smoothed error norm and confidence are
updated, a subject-level weight is arbitrated (minority penalty beats
confidence beats default 1.0), and one momentum-SGD step is taken on the
weighted class + adversarial domain loss.

LOSO holds out one subject per fold, fits on the rest (including the
subdomain partition), and aggregates subject-level predictions into a
confusion matrix and metrics report. An audit trail records every subject
id that reaches a gradient step or the subdomain partition so the absence
of leakage is checkable.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import confidence as conf_mod
from . import model as model_mod
from . import penalty as pen_mod
from .confidence import ConfidenceConfig, ConfidenceState
from .errors import ConfigError, DataError
from .features import SubjectDataset
from .metrics import MetricsReport, classification_report, mae_rmse
from .model import ModelConfig, ModelParams
from .penalty import PenaltyConfig


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    confidence: ConfidenceConfig = ConfidenceConfig()
    penalty: PenaltyConfig = PenaltyConfig()
    total_epochs: int = 100
    learning_rate: float = 0.05
    momentum: float = 0.9
    enable_confidence: bool = True
    enable_penalty: bool = True
    seed: int = 0
    score_scale: float = 27.0  # regression-target normalizer

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ConfigError("total_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")


@dataclass
class LedgerRow:
    subject_id: str
    epoch: int
    w_conf: int
    w_pen: int
    val_conf: float
    val_pen: float
    w_all: float


@dataclass
class EpochStats:
    epoch: int
    total_loss: float
    train_accuracy: float
    ledger: list[LedgerRow]
    fallback_count: int  # cumulative over the run so far


@dataclass
class FoldResult:
    held_out_subject: str
    predicted_class: int
    true_class: int
    mean_probs: np.ndarray
    final_train_loss: float
    predicted_score: float | None = None
    true_score: float | None = None
    ledger_violations: int = 0
    fallback_count: int = 0
    history: list[EpochStats] | None = None


@dataclass
class AuditTrail:
    """Subject ids seen by gradient batches and the subdomain partition."""
    gradient_ids: set = field(default_factory=set)
    ssp_ids: set = field(default_factory=set)

    def record(self, kind: str, subject_ids) -> None:
        target = self.gradient_ids if kind == "gradient" else self.ssp_ids
        target.update(subject_ids)

    def all_ids(self) -> set:
        return self.gradient_ids | self.ssp_ids


def arbitrate_weights(
    *,
    triggered: bool,
    conf_active: bool,
    val_conf: float,
    val_pen: float,
    enable_confidence: bool,
    enable_penalty: bool,
) -> tuple[int, int, float]:
    """Fixed-priority weight arbitration: penalty first, confidence second."""
    if enable_penalty and triggered:
        return 0, 1, val_pen
    if enable_confidence and conf_active:
        return 1, 0, val_conf
    return 0, 0, 1.0


def subject_losses(
    params: ModelParams,
    cfg: TrainConfig,
    subject: SubjectDataset,
    domain_label: int,
    w_all: float,
) -> tuple[float, model_mod.Gradients]:
    """Weighted loss and gradients over one subject's samples."""
    batch = [(s.features, s.label, domain_label) for s in subject.samples]
    return model_mod.loss_and_gradients(params, cfg.model, batch, w_all)


def train_epoch(
    params: ModelParams,
    velocity: ModelParams,
    state: ConfidenceState,
    train_subjects: list[SubjectDataset],
    domain_map: dict[str, int],
    epoch: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
    audit: AuditTrail | None = None,
) -> tuple[ModelParams, ModelParams, ConfidenceState, EpochStats]:
    if epoch >= cfg.total_epochs:
        raise DataError(f"epoch {epoch} >= total_epochs {cfg.total_epochs}")
    conf_active = conf_mod.confidence_active(epoch, cfg.total_epochs,
                                             cfg.confidence)
    order = rng.permutation(len(train_subjects))

    ledger: list[LedgerRow] = []
    total_loss = 0.0
    correct = 0
    for idx in order:
        subject = train_subjects[idx]
        sid = subject.subject_id
        Xb = subject.feature_array()
        cache = model_mod.forward_batch(params, cfg.model, Xb)
        probs = cache["Pc"]

        err = probs.copy()
        err[:, subject.label] -= 1.0
        el2 = float(np.linalg.norm(err, axis=1).mean())
        conf_mod.epoch_update(state, sid, el2, cfg.confidence)

        pred = int(np.argmax(probs.mean(axis=0)))
        if pred == subject.label:
            correct += 1

        nel2 = state.nel2(sid)
        val_conf = state.val_conf(sid)
        val_pen = pen_mod.penalty_value(nel2, cfg.penalty)
        triggered = pen_mod.penalty_triggered(subject.label, pred, cfg.penalty)
        w_conf, w_pen, w_all = arbitrate_weights(
            triggered=triggered, conf_active=conf_active,
            val_conf=val_conf, val_pen=val_pen,
            enable_confidence=cfg.enable_confidence,
            enable_penalty=cfg.enable_penalty,
        )
        ledger.append(LedgerRow(sid, epoch, w_conf, w_pen,
                                val_conf, val_pen, w_all))

        y = np.full(len(subject.samples), subject.label, dtype=np.intp)
        dlab = np.full(len(subject.samples), domain_map[sid], dtype=np.intp)
        loss, grads = model_mod._class_loss_and_gradients(
            params, cfg.model, cache, y, dlab, w_all)
        if audit is not None:
            audit.record("gradient", [sid])
        params, velocity = model_mod.sgd_step(
            params, grads, cfg.learning_rate, velocity, cfg.momentum)
        total_loss += loss

    stats = EpochStats(
        epoch=epoch,
        total_loss=total_loss,
        train_accuracy=correct / len(train_subjects),
        ledger=ledger,
        fallback_count=state.fallback_count,
    )
    return params, velocity, state, stats


def _train_epoch_regression(
    params, velocity, train_subjects, domain_map, cfg, rng,
    audit: AuditTrail | None,
) -> tuple[ModelParams, ModelParams, float]:
    order = rng.permutation(len(train_subjects))
    total_loss = 0.0
    for idx in order:
        subject = train_subjects[idx]
        if subject.score is None:
            raise DataError(
                f"subject {subject.subject_id!r} has no score for regression")
        target = subject.score / cfg.score_scale
        dlab = np.full(len(subject.samples), domain_map[subject.subject_id],
                       dtype=np.intp)
        loss, grads = model_mod.regression_loss_and_gradients(
            params, cfg.model, subject.feature_array(), target, dlab, 1.0)
        if audit is not None:
            audit.record("gradient", [subject.subject_id])
        params, velocity = model_mod.sgd_step(
            params, grads, cfg.learning_rate, velocity, cfg.momentum)
        total_loss += loss
    return params, velocity, total_loss


def fit(
    train_subjects: list[SubjectDataset],
    cfg: TrainConfig,
    audit: AuditTrail | None = None,
) -> tuple[ModelParams, list[EpochStats]]:
    """Full training run; order of the input list does not matter."""
    if len(train_subjects) < 2:
        raise ConfigError("need at least 2 training subjects")
    train_subjects = sorted(train_subjects, key=lambda s: s.subject_id)
    if len({s.label for s in train_subjects}) < 2 and \
            cfg.model.head_mode == model_mod.CLASSIFICATION:
        raise ConfigError("need at least 2 classes among training subjects")

    domain_map = model_mod.ssp_partition(train_subjects, cfg.model.domains,
                                         cfg.seed)
    if audit is not None:
        audit.record("ssp", [s.subject_id for s in train_subjects])

    params = model_mod.init_params(cfg.model)
    velocity = params.zeros_like()
    state = ConfidenceState()
    rng = np.random.default_rng(cfg.seed)

    history: list[EpochStats] = []
    if cfg.model.head_mode == model_mod.REGRESSION:
        for epoch in range(cfg.total_epochs):
            params, velocity, loss = _train_epoch_regression(
                params, velocity, train_subjects, domain_map, cfg, rng, audit)
            history.append(EpochStats(epoch, loss, 0.0, [], 0))
    else:
        for epoch in range(cfg.total_epochs):
            params, velocity, state, stats = train_epoch(
                params, velocity, state, train_subjects, domain_map,
                epoch, cfg, rng, audit)
            history.append(stats)
    return params, history


def ledger_violations(history: list[EpochStats]) -> int:
    """Rows breaking mutual exclusion or the default-weight rule."""
    bad = 0
    for st in history:
        for row in st.ledger:
            if row.w_conf * row.w_pen != 0:
                bad += 1
            elif row.w_conf == 0 and row.w_pen == 0 and row.w_all != 1.0:
                bad += 1
    return bad


def run_fold(
    all_subjects: list[SubjectDataset],
    held_out_id: str,
    cfg: TrainConfig,
    keep_history: bool = False,
) -> FoldResult:
    """Train on everyone but held_out_id, predict the held-out subject."""
    held_out = next(s for s in all_subjects if s.subject_id == held_out_id)
    train = [s for s in all_subjects if s.subject_id != held_out_id]
    audit = AuditTrail()
    params, history = fit(train, cfg, audit=audit)
    if held_out_id in audit.all_ids():
        raise RuntimeError(
            f"leakage: held-out subject {held_out_id!r} reached training")

    violations = ledger_violations(history)
    fallbacks = history[-1].fallback_count if history else 0
    if cfg.model.head_mode == model_mod.REGRESSION:
        score = model_mod.predict_subject_score(params, cfg.model, held_out)
        return FoldResult(
            held_out_subject=held_out_id,
            predicted_class=-1,
            true_class=-1,
            mean_probs=np.zeros(0),
            final_train_loss=history[-1].total_loss,
            predicted_score=score * cfg.score_scale,
            true_score=float(held_out.score),
            ledger_violations=violations,
            fallback_count=fallbacks,
            history=history if keep_history else None,
        )
    pred, mean_probs = model_mod.predict_subject(params, cfg.model, held_out)
    return FoldResult(
        held_out_subject=held_out_id,
        predicted_class=pred,
        true_class=held_out.label,
        mean_probs=mean_probs,
        final_train_loss=history[-1].total_loss,
        ledger_violations=violations,
        fallback_count=fallbacks,
        history=history if keep_history else None,
    )


def _run_fold_star(args):
    return run_fold(*args)


def loso(
    all_subjects: list[SubjectDataset],
    cfg: TrainConfig,
    parallel: int = 1,
    keep_history: bool = False,
) -> tuple[list[FoldResult], np.ndarray | None, MetricsReport]:
    """Leave-one-subject-out evaluation; folds are mutually independent."""
    if len(all_subjects) < 3:
        raise ConfigError("LOSO needs at least 3 subjects")
    ids = sorted(s.subject_id for s in all_subjects)
    if len(set(ids)) != len(ids):
        raise DataError("duplicate subject ids")

    jobs = [(all_subjects, sid, cfg, keep_history) for sid in ids]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            folds = list(pool.map(_run_fold_star, jobs))
    else:
        folds = [run_fold(*job) for job in jobs]

    if cfg.model.head_mode == model_mod.REGRESSION:
        pairs = [(f.true_score, f.predicted_score) for f in folds]
        return folds, None, MetricsReport(regression=mae_rmse(pairs))

    pairs = [(f.true_class, f.predicted_class) for f in folds]
    cm, report = classification_report(pairs, cfg.model.classes)
    return folds, cm, report


def fit_history_to_dict(history: list[EpochStats]) -> list[dict]:
    """Compact per-epoch history for run reports."""
    return [
        {
            "epoch": st.epoch,
            "total_loss": st.total_loss,
            "train_accuracy": st.train_accuracy,
            "fallback_count": st.fallback_count,
            "ledger": [
                [row.subject_id, row.w_conf, row.w_pen,
                 row.val_conf, row.val_pen, row.w_all]
                for row in st.ledger
            ],
        }
        for st in history
    ]
