"""Binary classification and ranking metrics for scored pairs.

roc_auc uses the rank (Mann-Whitney) formulation with midranks, so tied
scores contribute one half; pr_auc sums precision over right-continuous
recall steps, anchored at recall zero, which avoids the optimism of linear
interpolation in precision-recall space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, ShapeError, SingleClassInput

METRIC_COLUMNS = ("acc", "f1", "prec", "rec", "roc_auc", "pr_auc", "spec")


@dataclass(frozen=True)
class MetricReport:
    acc: float
    f1: float
    precision: float
    recall: float
    roc_auc: float
    pr_auc: float
    specificity: float
    threshold: float = 0.5

    def row(self) -> tuple[float, ...]:
        """Values in summary-table column order (Acc F1 Prec Rec ROC PR Spec)."""
        return (
            self.acc,
            self.f1,
            self.precision,
            self.recall,
            self.roc_auc,
            self.pr_auc,
            self.specificity,
        )

    def tsv_row(self) -> str:
        return "\t".join(format(v, ".10g") for v in self.row())


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError(f"scores {scores.shape} and labels {labels.shape} must be equal 1-d")
    if scores.size == 0:
        raise EmptyInput("no scored pairs")
    return scores, labels.astype(np.int64)


def threshold_metrics(
    scores, labels, threshold: float = 0.5
) -> tuple[float, float, float, float, float]:
    """(accuracy, f1, precision, recall, specificity) at ``score >= threshold``.

    Zero-denominator conventions: precision 0 with no predicted positives,
    recall 0 with no actual positives, f1 0 when precision + recall is 0,
    specificity 0 with no actual negatives.
    """
    scores, labels = _validate(scores, labels)
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    tn = int(np.sum(~pred & ~pos))
    fn = int(np.sum(~pred & pos))

    acc = (tp + tn) / scores.size
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0
    specificity = tn / (tn + fp) if (tn + fp) else 0.0
    return acc, f1, precision, recall, specificity


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties count 0.5."""
    scores, labels = _validate(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("roc_auc needs at least one positive and one negative")

    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # Midrank of the tie group occupying 1-based positions i+1 .. j+1.
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1

    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Area under precision-recall via step summation over unique thresholds."""
    scores, labels = _validate(scores, labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise SingleClassInput("pr_auc needs at least one positive")

    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    cum_tp = np.cumsum(sorted_labels)

    area = 0.0
    prev_recall = 0.0
    n = scores.size
    for k in range(n):
        if k + 1 < n and sorted_scores[k + 1] == sorted_scores[k]:
            continue  # not the last element of this threshold group
        tp = float(cum_tp[k])
        precision = tp / (k + 1)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def full_report(scores, labels, threshold: float = 0.5) -> MetricReport:
    acc, f1, precision, recall, specificity = threshold_metrics(scores, labels, threshold)
    return MetricReport(
        acc=acc,
        f1=f1,
        precision=precision,
        recall=recall,
        roc_auc=roc_auc(scores, labels),
        pr_auc=pr_auc(scores, labels),
        specificity=specificity,
        threshold=threshold,
    )
