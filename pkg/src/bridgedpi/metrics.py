"""ROC-AUC and thresholded classification metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata


def _check_labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney estimate of ROC-AUC; tied scores earn half credit."""
    s = np.asarray(scores, dtype=np.float64)
    y = _check_labels(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC is undefined for single-class labels")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """False/true positive rates at every distinct score threshold, from (0, 0) to (1, 1)."""
    s = np.asarray(scores, dtype=np.float64)
    y = _check_labels(labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each block of tied scores
    cut = np.r_[np.flatnonzero(np.diff(s)), y.size - 1]
    tps = np.cumsum(y)[cut]
    fps = (cut + 1) - tps
    tpr = np.r_[0.0, tps / max(tps[-1], 1)]
    fpr = np.r_[0.0, fps / max(fps[-1], 1)]
    return fpr, tpr


def trapezoid_auc(scores, labels) -> float:
    fpr, tpr = roc_curve(scores, labels)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


@dataclass
class EvalReport:
    auc: float
    acc: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    n: int
    # metric names that hit a zero denominator and were reported as 0
    degenerate: list[str] = field(default_factory=list)

    def as_row(self) -> dict:
        row = asdict(self)
        row["degenerate"] = ";".join(self.degenerate)
        return row


def threshold_metrics(scores, labels, threshold: float = 0.5) -> EvalReport:
    """Confusion counts and derived metrics with ``score >= threshold`` as positive.

    AUC is NaN when the labels hold a single class.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _check_labels(labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    degenerate = []

    def ratio(num, den, name):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    acc = ratio(tp + tn, y.size, "acc")
    precision = ratio(tp, tp + fp, "precision")
    recall = ratio(tp, tp + fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    try:
        auc = roc_auc(s, y)
    except ValueError:
        auc = float("nan")
    return EvalReport(auc, acc, precision, recall, f1, tp, fp, tn, fn, int(y.size), degenerate)


REPORT_FIELDS = ["stratum", "auc", "acc", "precision", "recall", "f1", "tp", "fp", "tn", "fn", "n", "degenerate"]


def reports_to_csv(reports: dict[str, EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for name, rep in reports.items():
        writer.writerow({"stratum": name, **rep.as_row()})
    return buf.getvalue()


def format_reports(reports: dict[str, EvalReport]) -> str:
    """Plain-text table, one row per stratum."""
    head = f"{'stratum':<10}{'n':>7}{'AUC':>8}{'ACC':>8}{'Prec':>8}{'Recall':>8}{'F1':>8}"
    lines = [head, "-" * len(head)]
    for name, r in reports.items():
        lines.append(f"{name:<10}{r.n:>7}{r.auc:>8.4f}{r.acc:>8.4f}{r.precision:>8.4f}{r.recall:>8.4f}{r.f1:>8.4f}")
    return "\n".join(lines)
