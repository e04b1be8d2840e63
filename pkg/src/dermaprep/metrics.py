"""Classifier evaluation: one-vs-rest ROC/AUC, confusion matrix, operating points.

Predictions carry one score per class. ROC curves are built one-vs-rest for
a chosen positive class; tied scores are grouped into a single curve point,
so the trapezoidal AUC equals the Mann-Whitney pairwise-win statistic
(ties counting one half) exactly.
"""

import csv
import re
from dataclasses import dataclass

import numpy as np


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class ScoredPrediction:
    item_id: str
    true_label: str
    scores: tuple  # aligned with the evaluation class list


@dataclass
class RocCurve:
    positive: str
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[0] is +inf for the (0,0) point


@dataclass
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # rows = true, cols = predicted


def _score_matrix(preds, classes):
    if not preds:
        raise MetricsError("no predictions")
    k = len(classes)
    mat = np.empty((len(preds), k), dtype=np.float64)
    labels = []
    for i, p in enumerate(preds):
        if len(p.scores) != k:
            raise MetricsError(f"{p.item_id}: {len(p.scores)} scores for {k} classes")
        if p.true_label not in classes:
            raise MetricsError(f"{p.item_id}: unknown true label {p.true_label!r}")
        mat[i] = p.scores
        labels.append(p.true_label)
    if not np.isfinite(mat).all():
        raise MetricsError("non-finite score in predictions")
    return mat, labels


def roc(preds, classes, positive):
    """One-vs-rest ROC curve for `positive`.

    Points run from (0, 0) to (1, 1); equal scores collapse into one point.
    """
    if positive not in classes:
        raise MetricsError(f"positive class {positive!r} not in class list")
    mat, labels = _score_matrix(preds, classes)
    s = mat[:, list(classes).index(positive)]
    y = np.array([lab == positive for lab in labels])
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise MetricsError(
            f"degenerate label set for {positive!r}: {pos} positives, {neg} negatives"
        )
    order = np.argsort(-s, kind="mergesort")
    ss = s[order]
    yy = y[order]
    ends = np.r_[np.nonzero(np.diff(ss) != 0)[0], len(ss) - 1]
    tp = np.cumsum(yy)[ends]
    fp = np.cumsum(~yy)[ends]
    tpr = np.concatenate([[0.0], tp / pos])
    fpr = np.concatenate([[0.0], fp / neg])
    thresholds = np.concatenate([[np.inf], ss[ends]])
    return RocCurve(positive, fpr, tpr, thresholds)


def auc(curve):
    """Area under the curve by the trapezoid rule."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def mean_auc(preds, classes, positives):
    """Mean one-vs-rest AUC over the given positive classes."""
    if not positives:
        raise MetricsError("no positive classes given")
    return float(np.mean([auc(roc(preds, classes, c)) for c in positives]))


def specificity_at_sensitivity(curve, level):
    """Specificity (1 - FPR) where the curve first reaches `level` sensitivity.

    Linear interpolation between adjacent curve points; level must lie in
    (0, 1). On a tie (a flat run at exactly `level`), the highest
    specificity operating point is reported.
    """
    if not 0.0 < level < 1.0:
        raise MetricsError(f"sensitivity level must be in (0, 1), got {level}")
    tpr, fpr = curve.tpr, curve.fpr
    i = int(np.searchsorted(tpr, level, side="left"))
    if i == 0:
        return 1.0 - float(fpr[0])
    if i >= len(tpr):  # unreachable: curves end at tpr == 1 > level
        return 1.0 - float(fpr[-1])
    if tpr[i] == tpr[i - 1]:
        return 1.0 - float(fpr[i])
    t = (level - tpr[i - 1]) / (tpr[i] - tpr[i - 1])
    return 1.0 - float(fpr[i - 1] + t * (fpr[i] - fpr[i - 1]))


def confusion(preds, classes):
    """Argmax confusion matrix; score ties go to the earlier class."""
    mat, labels = _score_matrix(preds, classes)
    k = len(classes)
    counts = np.zeros((k, k), dtype=np.int64)
    index = {c: i for i, c in enumerate(classes)}
    picks = np.argmax(mat, axis=1)
    for lab, j in zip(labels, picks):
        counts[index[lab], j] += 1
    return ConfusionMatrix(tuple(classes), counts)


def accuracy(cm):
    total = int(cm.counts.sum())
    if total == 0:
        raise MetricsError("empty confusion matrix")
    return float(np.trace(cm.counts) / total)


_CLASSES_RE = re.compile(r"^#\s*classes:\s*(.+?)\s*$")


def read_predictions(path):
    """Read a predictions CSV; returns (classes, predictions).

    Format: a `# classes: a,b,c` comment, then a header row
    `item_id,true_label,score_a,score_b,score_c`, then one row per item
    with float scores. Unreadable files raise OSError; format problems
    raise MetricsError.
    """
    classes = None
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                m = _CLASSES_RE.match(line.strip())
                if m:
                    if classes is not None:
                        raise MetricsError(f"{path}:{line_no}: second classes line")
                    classes = tuple(c.strip() for c in m.group(1).split(","))
                    if len(set(classes)) != len(classes) or not all(classes):
                        raise MetricsError(f"{path}:{line_no}: bad class list")
                continue
            rows.append((line_no, next(csv.reader([line]))))
    if classes is None:
        raise MetricsError(f"{path}: missing '# classes:' line")
    if not rows:
        raise MetricsError(f"{path}: no header row")
    line_no, header = rows[0]
    expected = ["item_id", "true_label", *[f"score_{c}" for c in classes]]
    if [h.strip() for h in header] != expected:
        raise MetricsError(f"{path}:{line_no}: expected header {','.join(expected)}")
    preds = []
    for line_no, rec in rows[1:]:
        if len(rec) != len(expected):
            raise MetricsError(f"{path}:{line_no}: expected {len(expected)} fields, got {len(rec)}")
        try:
            scores = tuple(float(v) for v in rec[2:])
        except ValueError:
            raise MetricsError(f"{path}:{line_no}: non-numeric score") from None
        preds.append(ScoredPrediction(rec[0].strip(), rec[1].strip(), scores))
    if not preds:
        raise MetricsError(f"{path}: no prediction rows")
    return classes, preds
