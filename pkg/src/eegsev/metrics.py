"""Subject-level evaluation: confusion matrix, macro/micro P/R/F1, MAE/RMSE.

Macro averages treat every class equally; a class with a zero denominator
(never predicted, or absent from the truth) contributes 0 to the mean.
Macro F1 is computed from the macro precision and recall, not as a mean of
per-class F1. Micro precision pools global TP/FP and equals accuracy for
single-label multiclass problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class MetricsReport:
    accuracy: float | None = None
    per_class: list[tuple[float, float, float]] | None = None
    macro: tuple[float, float, float] | None = None
    micro: float | None = None
    regression: tuple[float, float] | None = None  # (MAE, RMSE)

    def to_dict(self) -> dict:
        out = {}
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
            out["accuracy_pct"] = f"{100.0 * self.accuracy:.2f}"
        if self.per_class is not None:
            out["per_class"] = [
                {"precision": p, "recall": r, "f1": f,
                 "precision_pct": f"{100*p:.2f}", "recall_pct": f"{100*r:.2f}",
                 "f1_pct": f"{100*f:.2f}"}
                for p, r, f in self.per_class
            ]
        if self.macro is not None:
            p, r, f = self.macro
            out["macro"] = {"precision": p, "recall": r, "f1": f,
                            "precision_pct": f"{100*p:.2f}",
                            "recall_pct": f"{100*r:.2f}",
                            "f1_pct": f"{100*f:.2f}"}
        if self.micro is not None:
            out["micro"] = self.micro
            out["micro_pct"] = f"{100.0 * self.micro:.2f}"
        if self.regression is not None:
            out["regression"] = {"mae": self.regression[0],
                                 "rmse": self.regression[1]}
        return out


def confusion(pairs: list[tuple[int, int]], n_classes: int) -> np.ndarray:
    """counts[t][p] = number of subjects with true class t predicted as p."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for true_c, pred_c in pairs:
        if not (0 <= true_c < n_classes and 0 <= pred_c < n_classes):
            raise DataError(f"class pair ({true_c}, {pred_c}) out of range "
                            f"for N={n_classes}")
        cm[true_c, pred_c] += 1
    return cm


def per_class_prf(cm: np.ndarray) -> list[tuple[float, float, float]]:
    cm = np.asarray(cm)
    out = []
    for n in range(cm.shape[0]):
        tp = cm[n, n]
        pred_n = cm[:, n].sum()
        true_n = cm[n, :].sum()
        p = float(tp / pred_n) if pred_n else 0.0
        r = float(tp / true_n) if true_n else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) else 0.0
        out.append((p, r, f1))
    return out


def macro_prf(cm: np.ndarray) -> tuple[float, float, float]:
    per_class = per_class_prf(cm)
    pre = float(np.mean([p for p, _, _ in per_class]))
    rec = float(np.mean([r for _, r, _ in per_class]))
    f1 = 2 * pre * rec / (pre + rec) if (pre + rec) else 0.0
    return pre, rec, f1


def micro_prf(cm: np.ndarray) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total < 1:
        raise DataError("empty confusion matrix")
    return float(np.trace(cm) / total)


def mae_rmse(pairs: list[tuple[float, float]]) -> tuple[float, float]:
    if not pairs:
        raise DataError("no prediction pairs")
    err = np.array([t - p for t, p in pairs], dtype=np.float64)
    return float(np.abs(err).mean()), float(np.sqrt((err ** 2).mean()))


def classification_report(pairs: list[tuple[int, int]],
                          n_classes: int) -> tuple[np.ndarray, MetricsReport]:
    cm = confusion(pairs, n_classes)
    return cm, MetricsReport(
        accuracy=micro_prf(cm),
        per_class=per_class_prf(cm),
        macro=macro_prf(cm),
        micro=micro_prf(cm),
    )
