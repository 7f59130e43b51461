"""Run-report assembly, text tables and figure rendering.

Reports are plain JSON (deterministic: sorted keys, no timestamps). The
report path also renders matplotlib figures (confusion-matrix heatmap,
training curves, sweep curves) to files next to the delimited output.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .config import train_config_to_dict
from .errors import FormatError
from .features import level_names
from .training import FoldResult, TrainConfig, fit_history_to_dict

REPORT_VERSION = 1


def class_labels(n_classes: int) -> list[str]:
    if n_classes == 5:
        return level_names("PHQ9")
    if n_classes == 4:
        return level_names("BDI")
    return [f"Class{i}" for i in range(n_classes)]


def fold_to_dict(fold: FoldResult) -> dict:
    out = {
        "held_out_subject": fold.held_out_subject,
        "predicted_class": fold.predicted_class,
        "true_class": fold.true_class,
        "mean_probs": [float(p) for p in fold.mean_probs],
        "final_train_loss": fold.final_train_loss,
        "ledger_violations": fold.ledger_violations,
        "fallback_count": fold.fallback_count,
    }
    if fold.predicted_score is not None:
        out["predicted_score"] = fold.predicted_score
        out["true_score"] = fold.true_score
    return out


def build_loso_report(cfg: TrainConfig, folds, cm, metrics) -> dict:
    report = {
        "report_version": REPORT_VERSION,
        "command": "loso",
        "config": train_config_to_dict(cfg),
        "folds": [fold_to_dict(f) for f in folds],
        "confusion_matrix": None if cm is None else cm.tolist(),
        "metrics": metrics.to_dict(),
        "fallback_count": sum(f.fallback_count for f in folds),
        "ledger_violations": sum(f.ledger_violations for f in folds),
    }
    histories = {
        f.held_out_subject: fit_history_to_dict(f.history)
        for f in folds if f.history is not None
    }
    if histories:
        report["history"] = histories
    return report


def build_fit_report(cfg: TrainConfig, history, extra: dict | None = None) -> dict:
    report = {
        "report_version": REPORT_VERSION,
        "command": "train",
        "config": train_config_to_dict(cfg),
        "history": fit_history_to_dict(history),
        "fallback_count": history[-1].fallback_count if history else 0,
    }
    if extra:
        report.update(extra)
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> dict:
    report = json.loads(Path(path).read_text())
    version = report.get("report_version")
    if version != REPORT_VERSION:
        raise FormatError(
            f"{path}: report version {version!r}, expected {REPORT_VERSION}")
    return report


def render_text(report: dict) -> str:
    """Human-readable table of a loso/train report, 2-decimal percentages."""
    lines = []
    metrics = report.get("metrics", {})
    if "accuracy" in metrics:
        lines.append(f"Accuracy: {100 * metrics['accuracy']:.2f}")
        names = class_labels(len(metrics.get("per_class", [])))
        lines.append(f"{'Level':<18}{'Pre (%)':>10}{'Rec (%)':>10}{'F1 (%)':>10}")
        for name, row in zip(names, metrics["per_class"]):
            lines.append(
                f"{name:<18}{100 * row['precision']:>10.2f}"
                f"{100 * row['recall']:>10.2f}{100 * row['f1']:>10.2f}")
        macro = metrics["macro"]
        lines.append(
            f"{'Macro Average':<18}{100 * macro['precision']:>10.2f}"
            f"{100 * macro['recall']:>10.2f}{100 * macro['f1']:>10.2f}")
        lines.append(f"Micro precision: {100 * metrics['micro']:.2f}")
    if "regression" in metrics:
        reg = metrics["regression"]
        lines.append(f"MAE:  {reg['mae']:.2f}")
        lines.append(f"RMSE: {reg['rmse']:.2f}")
    if "fallback_count" in report:
        lines.append(f"Fallback activations: {report['fallback_count']}")
    return "\n".join(lines) + "\n"


def render_confusion_figure(report: dict, path: str | Path) -> bool:
    cm = report.get("confusion_matrix")
    if cm is None:
        return False
    cm = np.asarray(cm)
    names = class_labels(cm.shape[0])
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(cm, cmap="Blues")
    for (i, j), v in np.ndenumerate(cm):
        ax.text(j, i, str(v), ha="center", va="center",
                color="white" if v > cm.max() / 2 else "black")
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_history_figure(report: dict, path: str | Path) -> bool:
    history = report.get("history")
    if not isinstance(history, list) or not history:
        return False
    epochs = [st["epoch"] for st in history]
    losses = [st["total_loss"] for st in history]
    accs = [st["train_accuracy"] for st in history]
    fig, ax1 = plt.subplots(figsize=(6.0, 3.8))
    ax1.plot(epochs, losses, color="tab:red", label="train loss")
    ax1.set_xlabel("Epoch")
    ax1.set_ylabel("Total loss", color="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(epochs, accs, color="tab:blue", label="train accuracy")
    ax2.set_ylabel("Train accuracy", color="tab:blue")
    ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return True


def render_sweep_figure(rows: list[dict], path: str | Path) -> None:
    values = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.plot(values, [r["accuracy"] for r in rows], "o-", label="accuracy")
    ax.plot(values, [r["macro_f1"] for r in rows], "s--", label="macro F1")
    ax.set_xlabel(rows[0]["param"] if rows else "value")
    ax.set_ylabel("Score")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
