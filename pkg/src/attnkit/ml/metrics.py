"""Binary classification metrics with chance-referenced scores.

Thresholded metrics (precision/recall/F1 per class, macro F1) and ranking
metrics (AUC-PR via average precision, ROC-AUC via the rank statistic) are
reported together with chance levels and above-chance fractions.  Chance
equals class prevalence for both F1 and AUC-PR.  Metrics with a zero
denominator are missing (None), never silently zero, except F1 = 0 when
precision and recall are both defined and zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..validation import as_float_array, check_binary_labels, check_finite, check_same_length

__all__ = [
    "f1_score",
    "average_precision",
    "roc_auc",
    "above_chance",
    "MetricsReport",
    "evaluate_scores",
    "ThresholdSweep",
    "threshold_sweep",
    "DEFAULT_THRESHOLD_GRID",
]

DEFAULT_THRESHOLD_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _check_scores_labels(scores, labels):
    s = as_float_array(scores, "scores", ndim=1)
    y = check_binary_labels(labels)
    check_same_length(("scores", s), ("labels", y))
    check_finite(s, "scores")
    if len(s) == 0:
        raise ValueError("scores must be non-empty")
    return s, y


def average_precision(scores, labels) -> float:
    """Step-wise average precision (AUC-PR estimator).

    Rows are ranked by descending score, ties broken by ascending input
    index; AP is the mean of precision@k over the positive ranks.
    """
    s, y = _check_scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("average_precision needs both classes")
    order = np.lexsort((np.arange(len(s)), -s))
    hits = y[order]
    precision_at = np.cumsum(hits) / np.arange(1, len(s) + 1)
    return float(precision_at[hits == 1].mean())


def roc_auc(scores, labels) -> float:
    """ROC-AUC via the Mann-Whitney rank statistic with tie averaging."""
    s, y = _check_scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def above_chance(actual: float, chance: float, perfect: float = 1.0) -> float:
    """Fraction of the chance-to-perfect span achieved: (a - c)/(p - c)."""
    if perfect <= chance:
        raise ValueError("perfect must exceed chance")
    return (actual - chance) / (perfect - chance)


@dataclass(frozen=True)
class MetricsReport:
    """Thresholded + ranking metrics for one score/label set."""

    n: int
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    per_class: dict            # {0: {...}, 1: {precision, recall, f1}}
    macro_f1: float | None
    auc_pr: float | None
    roc_auc: float | None
    chance_auc_pr: float
    chance_f1: dict            # prevalence per class
    above_chance_auc_pr: float | None
    above_chance_f1: dict      # per class, None where F1 missing
    groups: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "n": self.n,
            "threshold": self.threshold,
            "confusion": {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn},
            "per_class": {str(k): dict(v) for k, v in self.per_class.items()},
            "macro_f1": self.macro_f1,
            "auc_pr": self.auc_pr,
            "roc_auc": self.roc_auc,
            "chance": {"auc_pr": self.chance_auc_pr,
                       "f1": {str(k): v for k, v in self.chance_f1.items()}},
            "above_chance": {"auc_pr": self.above_chance_auc_pr,
                             "f1": {str(k): v for k, v in self.above_chance_f1.items()}},
        }
        if self.groups is not None:
            out["groups"] = {str(g): r.as_dict() for g, r in self.groups.items()}
        return out


def _class_metrics(tp: int, fp: int, fn: int) -> dict:
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    f1 = f1_score(precision, recall) if precision is not None and recall is not None else None
    return {"precision": precision, "recall": recall, "f1": f1}


def evaluate_scores(scores, labels, threshold: float = 0.5,
                    groups=None) -> MetricsReport:
    """Full metrics report: predictions are score >= threshold.

    Ranking metrics are missing when only one class is present; thresholded
    metrics are missing exactly where their denominator is zero.  When a
    groups array is supplied, a sub-report per group value is attached.
    """
    s, y = _check_scores_labels(scores, labels)
    pred = (s >= threshold).astype(np.int64)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))

    per_class = {
        1: _class_metrics(tp, fp, fn),
        0: _class_metrics(tn, fn, fp),
    }
    defined_f1 = [m["f1"] for m in per_class.values() if m["f1"] is not None]
    macro_f1 = float(np.mean(defined_f1)) if defined_f1 else None

    prevalence = {1: float(np.mean(y == 1)), 0: float(np.mean(y == 0))}
    both = 0 < prevalence[1] < 1
    auc_pr = average_precision(s, y) if both else None
    roc = roc_auc(s, y) if both else None

    above_f1 = {}
    for c in (0, 1):
        f1 = per_class[c]["f1"]
        chance = prevalence[c]
        above_f1[c] = (above_chance(f1, chance) if f1 is not None and chance < 1 else None)

    sub = None
    if groups is not None:
        groups = np.asarray(groups)
        check_same_length(("scores", s), ("groups", groups))
        sub = {}
        for g in sorted(np.unique(groups).tolist()):
            mask = groups == g
            sub[g] = evaluate_scores(s[mask], y[mask], threshold=threshold)

    return MetricsReport(
        n=len(y), threshold=float(threshold), tp=tp, fp=fp, tn=tn, fn=fn,
        per_class=per_class, macro_f1=macro_f1, auc_pr=auc_pr, roc_auc=roc,
        chance_auc_pr=prevalence[1], chance_f1=prevalence,
        above_chance_auc_pr=(above_chance(auc_pr, prevalence[1])
                             if auc_pr is not None and prevalence[1] < 1 else None),
        above_chance_f1=above_f1, groups=sub,
    )


@dataclass(frozen=True)
class ThresholdSweep:
    reports: tuple
    best_threshold: float | None    # smallest threshold achieving max F1 (class 1)
    best_f1: float | None


def threshold_sweep(scores, labels, grid=None) -> ThresholdSweep:
    """Evaluate a threshold grid (default 0.1..0.9 in steps of 0.1)."""
    if grid is None:
        grid = DEFAULT_THRESHOLD_GRID
    reports = tuple(evaluate_scores(scores, labels, threshold=t) for t in grid)
    best_threshold = None
    best_f1 = None
    for r in reports:
        f1 = r.per_class[1]["f1"]
        if f1 is None:
            continue
        if best_f1 is None or f1 > best_f1:
            best_f1 = f1
            best_threshold = r.threshold
    return ThresholdSweep(reports=reports, best_threshold=best_threshold, best_f1=best_f1)
