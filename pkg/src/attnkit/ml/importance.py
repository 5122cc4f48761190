"""Permutation feature importance against average precision."""

from __future__ import annotations

import numpy as np

from ..validation import as_float_array, check_binary_labels, check_random_state
from .metrics import average_precision

__all__ = ["permutation_importance", "select_top_k"]


def permutation_importance(model, X, y, repeats: int = 10, seed: int = 0) -> np.ndarray:
    """Mean drop in average precision when one column is shuffled.

    The baseline uses the unmodified matrix; each of ``repeats`` rounds
    permutes a single column in place (restoring it afterwards) and
    measures baseline - permuted score.  Larger values mean the model
    relies more on that column.
    """
    X = as_float_array(X, "X")
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    y = check_binary_labels(y)
    if len(y) != X.shape[0]:
        raise ValueError("X and y disagree on the number of rows")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    rng = check_random_state(seed)
    baseline = average_precision(model.predict_scores(X), y)
    n, d = X.shape
    importances = np.zeros(d)
    work = X.copy()
    for f in range(d):
        saved = work[:, f].copy()
        drops = np.empty(repeats)
        for r in range(repeats):
            work[:, f] = saved[rng.permutation(n)]
            drops[r] = baseline - average_precision(model.predict_scores(work), y)
        work[:, f] = saved
        importances[f] = drops.mean()
    return importances


def select_top_k(importances, k: int, feature_names=None):
    """Indices (or names) of the k most important features.

    Sorted by descending importance with ties broken by ascending index.
    """
    imp = as_float_array(importances, "importances", ndim=1)
    if not 1 <= k <= len(imp):
        raise ValueError("k must be between 1 and the number of features")
    order = np.lexsort((np.arange(len(imp)), -imp))[:k]
    if feature_names is None:
        return [int(i) for i in order]
    feature_names = list(feature_names)
    if len(feature_names) != len(imp):
        raise ValueError("feature_names length must match importances")
    return [feature_names[int(i)] for i in order]
