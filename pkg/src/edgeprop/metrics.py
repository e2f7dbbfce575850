"""Ranking metrics and dataset splitting.

Average precision uses step-wise interpolation over descending-score
thresholds with tied scores entering a threshold together; AUC is the
Mann-Whitney statistic (probability a random positive outranks a random
negative, ties counted half).  Both have brute-force quadratic oracles in
the test suite and must match them to near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import BipartiteEdgeGraph

__all__ = [
    "DataSplit",
    "MetricReport",
    "make_split",
    "average_precision",
    "roc_auc",
    "evaluate_scores",
]


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/validation/test edge-index sets."""

    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self) -> None:
        for name in ("train_idx", "val_idx", "test_idx"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        combined = np.concatenate([self.train_idx, self.val_idx, self.test_idx])
        if len(np.unique(combined)) != len(combined):
            raise ValidationError("split partitions must be pairwise disjoint")


def make_split(
    g: BipartiteEdgeGraph,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DataSplit:
    """Randomly split the labeled edges into train/validation/test sets.

    A seeded uniform permutation is sliced contiguously; each part lands
    within one edge of its requested ratio.  Requires at least 10 labeled
    edges so that no part can come out empty under the default ratios.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise ValidationError(f"ratios {ratios} must be positive and sum to 1")
    labeled = g.labeled_indices()
    n = len(labeled)
    if n < 10:
        raise ValidationError(f"need at least 10 labeled edges, found {n}")
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = labeled[perm]
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_train = min(max(n_train, 1), n - 2)
    n_val = min(max(n_val, 1), n - n_train - 1)
    return DataSplit(
        train_idx=shuffled[:n_train],
        val_idx=shuffled[n_train:n_train + n_val],
        test_idx=shuffled[n_train + n_val:],
    )


def _check_binary(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have equal length")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValidationError("labels must be 0/1")
    pos = labels.sum()
    if pos == 0 or pos == len(labels):
        raise ValidationError("need at least one positive and one negative")
    return scores, labels


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the precision-recall curve, tied scores grouped."""
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # Threshold boundaries: last index of each tied group.
    boundary = np.flatnonzero(np.diff(sorted_scores) != 0)
    ends = np.concatenate([boundary, [len(scores) - 1]])
    tp = np.cumsum(sorted_labels)[ends]
    predicted = ends + 1.0
    precision = tp / predicted
    recall = tp / sorted_labels.sum()
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with ties counted half."""
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    # Average ranks for tied groups, 1-based.
    n = len(scores)
    ranks = np.empty(n)
    boundary = np.flatnonzero(np.diff(sorted_scores) != 0)
    starts = np.concatenate([[0], boundary + 1])
    ends = np.concatenate([boundary, [n - 1]])
    for lo, hi in zip(starts, ends):
        ranks[lo:hi + 1] = 0.5 * (lo + hi) + 1.0
    pos = labels[order] == 1.0
    n_pos = int(pos.sum())
    n_neg = n - n_pos
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class MetricReport:
    """Macro-averaged ranking metrics with per-class detail.

    Classes without both a positive and a negative example in the evaluated
    subset cannot be ranked; they are skipped from the macro means and
    listed in ``skipped_classes`` (their per-class entries are NaN).
    """

    ap: float
    auc: float
    per_class_ap: np.ndarray
    per_class_auc: np.ndarray
    skipped_classes: tuple[int, ...]

    def to_json_dict(self) -> dict:
        def clean(x: float):
            return None if np.isnan(x) else float(x)

        return {
            "schema_version": 1,
            "ap": clean(self.ap),
            "auc": clean(self.auc),
            "per_class_ap": [clean(x) for x in self.per_class_ap],
            "per_class_auc": [clean(x) for x in self.per_class_auc],
            "skipped_classes": list(self.skipped_classes),
        }


def evaluate_scores(y_score: np.ndarray, y_true: np.ndarray) -> MetricReport:
    """Macro AP/AUC of per-class scores against multi-hot ground truth."""
    y_score = np.asarray(y_score, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_score.shape != y_true.shape or y_score.ndim != 2:
        raise ValidationError("scores and labels must both be (n, |C|)")
    n_classes = y_score.shape[1]
    ap = np.full(n_classes, np.nan)
    auc = np.full(n_classes, np.nan)
    skipped: list[int] = []
    for c in range(n_classes):
        pos = y_true[:, c].sum()
        if pos == 0 or pos == len(y_true):
            skipped.append(c)
            continue
        ap[c] = average_precision(y_score[:, c], y_true[:, c])
        auc[c] = roc_auc(y_score[:, c], y_true[:, c])
    valid = ~np.isnan(auc)
    if not valid.any():
        raise ValidationError("no class has both positives and negatives")
    return MetricReport(
        ap=float(ap[valid].mean()),
        auc=float(auc[valid].mean()),
        per_class_ap=ap,
        per_class_auc=auc,
        skipped_classes=tuple(skipped),
    )
