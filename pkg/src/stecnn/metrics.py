"""Imbalanced multi-class metrics: G-mean, MAUC, MMCC, k-approximate accuracy."""
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

NUM_CLASSES = 17
DEFAULT_KS = (1, 3, 5)


class PairUndefined(ValueError):
    """A class pair lacks samples of one of its classes."""


def confusion_matrix(labels, predictions, num_classes=NUM_CLASSES):
    """Counts C[i, j] of true class i predicted as j."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions differ in length")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def g_mean(cm):
    """Geometric mean of recall over classes present in the true labels."""
    cm = np.asarray(cm)
    support = cm.sum(axis=1)
    if support.sum() == 0:
        raise ValueError("empty confusion matrix")
    present = support > 0
    recall = np.diag(cm)[present] / support[present]
    if np.any(recall == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(recall))))


def average_ranks(values):
    """1-based ranks, ties sharing the mean of their positions."""
    values = np.asarray(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(values)]))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def _one_way_auc(scores, labels, i, j):
    # P(score_i of an i-sample > score_i of a j-sample), ties count half
    mask = (labels == i) | (labels == j)
    s = scores[mask, i]
    is_i = labels[mask] == i
    n_i, n_j = int(is_i.sum()), int((~is_i).sum())
    ranks = average_ranks(s)
    return (ranks[is_i].sum() - n_i * (n_i + 1) / 2.0) / (n_i * n_j)


def pairwise_auc(scores, labels, i, j):
    """Hand-and-Till A(i, j) = (A(i|j) + A(j|i)) / 2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not (np.any(labels == i) and np.any(labels == j)):
        raise PairUndefined(f"pair ({i}, {j}) undefined: a class has no samples")
    return 0.5 * (_one_way_auc(scores, labels, i, j) + _one_way_auc(scores, labels, j, i))


def mauc(scores, labels):
    """Mean pairwise AUC over all pairs of classes present in ``labels``."""
    labels = np.asarray(labels)
    present = np.unique(labels)
    if len(present) < 2:
        raise ValueError("MAUC needs at least two classes present")
    total = 0.0
    count = 0
    for a in range(len(present)):
        for b in range(a + 1, len(present)):
            total += pairwise_auc(scores, labels, present[a], present[b])
            count += 1
    return total / count


def mmcc(cm):
    """Multi-class Matthews correlation from the confusion matrix; 0 when degenerate."""
    cm = np.asarray(cm, dtype=np.float64)
    t = cm.sum(axis=0)
    p = cm.sum(axis=1)
    c = np.trace(cm)
    s = cm.sum()
    denom = (s * s - np.dot(p, p)) * (s * s - np.dot(t, t))
    if denom <= 0:
        return 0.0
    return float((c * s - np.dot(p, t)) / np.sqrt(denom))


def acc_k(predictions, labels, k):
    """Accuracy with location tolerance k.

    Class 0 (no wave) must be predicted exactly; for a nonzero true class
    a nonzero prediction within k positions counts as correct.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if labels.size == 0:
        raise ValueError("empty input")
    absent = labels == 0
    correct = np.where(absent, predictions == 0,
                       (predictions != 0) & (np.abs(predictions - labels) <= k))
    return float(correct.mean())


@dataclass
class EvalReport:
    g_mean: float
    mauc: float
    mmcc: float
    acc: dict
    confusion: np.ndarray
    n: int
    ks: tuple = field(default=DEFAULT_KS)

    def metrics(self):
        out = {"g_mean": self.g_mean, "mauc": self.mauc, "mmcc": self.mmcc}
        out.update((f"acc_{k}", v) for k, v in sorted(self.acc.items()))
        return out

    def to_dict(self):
        return {
            "n": self.n,
            "metrics": self.metrics(),
            "confusion": self.confusion.tolist(),
        }


def eval_report(scores, labels, predictions=None, ks=DEFAULT_KS, num_classes=NUM_CLASSES):
    """All metrics on one sample set. Predictions default to argmax of scores.

    MAUC is reported as ``None`` when fewer than two classes are present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty input")
    if scores.shape[0] != labels.shape[0]:
        raise ValueError("scores and labels differ in length")
    if predictions is None:
        predictions = np.argmax(scores, axis=1)
    predictions = np.asarray(predictions, dtype=np.int64)
    cm = confusion_matrix(labels, predictions, num_classes)
    try:
        m = mauc(scores, labels)
    except ValueError:
        logger.warning("MAUC undefined: fewer than two classes present")
        m = None
    all_ks = sorted(set((0, *ks)))
    return EvalReport(
        g_mean=g_mean(cm),
        mauc=m,
        mmcc=mmcc(cm),
        acc={k: acc_k(predictions, labels, k) for k in all_ks},
        confusion=cm,
        n=int(labels.size),
        ks=tuple(ks),
    )
