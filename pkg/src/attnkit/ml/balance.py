"""Class rebalancing by oversampling the training partition.

Both samplers equalize every class to the majority count by appending new
rows after the originals; existing rows are never modified or removed.
Random oversampling duplicates minority rows drawn uniformly with
replacement; SMOTE interpolates between a minority row and one of its k
nearest minority neighbours at a uniform random fraction along the segment.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..validation import as_float_array, check_binary_labels, check_finite, check_random_state

__all__ = ["RandomOverSampler", "SmoteSampler", "balance", "BALANCE_METHODS"]

BALANCE_METHODS = ("none", "random", "smote")


def _check_xy(X, y):
    X = as_float_array(X, "X")
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    check_finite(X, "X")
    y = check_binary_labels(y)
    if len(y) != X.shape[0]:
        raise ValueError("X and y disagree on the number of rows")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("cannot balance a single-class label set")
    return X, y, classes, counts


class RandomOverSampler:
    """Duplicate minority rows uniformly at random until classes are equal."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit_resample(self, X, y):
        X, y, classes, counts = _check_xy(X, y)
        rng = check_random_state(self.seed)
        target = int(counts.max())
        extra_rows = []
        extra_labels = []
        for cls, count in zip(classes, counts):
            deficit = target - int(count)
            if deficit == 0:
                continue
            rows = np.flatnonzero(y == cls)
            picks = rng.integers(0, len(rows), deficit)
            extra_rows.append(X[rows[picks]])
            extra_labels.append(np.full(deficit, cls, dtype=y.dtype))
        if not extra_rows:
            return X.copy(), y.copy()
        return (np.vstack([X] + extra_rows),
                np.concatenate([y] + extra_labels))


class SmoteSampler:
    """Synthetic minority oversampling: interpolate toward a near neighbour.

    Each synthetic row is x + u * (neighbour - x) with u ~ U(0, 1), where the
    neighbour is one of the k nearest same-class rows (k is capped at
    class size - 1).  A class with fewer than two rows cannot be
    interpolated; it falls back to duplication with a warning.
    """

    def __init__(self, k: int = 5, seed: int = 0):
        self.k = k
        self.seed = seed

    def fit_resample(self, X, y):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        X, y, classes, counts = _check_xy(X, y)
        rng = check_random_state(self.seed)
        target = int(counts.max())
        extra_rows = []
        extra_labels = []
        for cls, count in zip(classes, counts):
            deficit = target - int(count)
            if deficit == 0:
                continue
            rows = np.flatnonzero(y == cls)
            if len(rows) < 2:
                warnings.warn(
                    f"class {cls} has fewer than two rows; duplicating instead of interpolating")
                picks = rng.integers(0, len(rows), deficit)
                extra_rows.append(X[rows[picks]])
                extra_labels.append(np.full(deficit, cls, dtype=y.dtype))
                continue
            pool = X[rows]
            k_eff = min(self.k, len(rows) - 1)
            # k nearest same-class neighbours per row, ties by ascending index
            d2 = ((pool[:, None, :] - pool[None, :, :]) ** 2).sum(axis=2)
            np.fill_diagonal(d2, np.inf)
            neighbour_idx = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
            synthetic = np.empty((deficit, X.shape[1]))
            for s in range(deficit):
                i = int(rng.integers(0, len(rows)))
                nb = int(neighbour_idx[i, int(rng.integers(0, k_eff))])
                u = float(rng.uniform())
                synthetic[s] = pool[i] + u * (pool[nb] - pool[i])
            extra_rows.append(synthetic)
            extra_labels.append(np.full(deficit, cls, dtype=y.dtype))
        if not extra_rows:
            return X.copy(), y.copy()
        return (np.vstack([X] + extra_rows),
                np.concatenate([y] + extra_labels))


def balance(X, y, method: str = "none", k: int = 5, seed: int = 0):
    """Dispatch to a sampler by name; "none" returns copies unchanged."""
    if method == "none":
        X = as_float_array(X, "X")
        y = check_binary_labels(y)
        return X.copy(), y.copy()
    if method == "random":
        return RandomOverSampler(seed=seed).fit_resample(X, y)
    if method == "smote":
        return SmoteSampler(k=k, seed=seed).fit_resample(X, y)
    raise ValueError(f"unknown balance method {method!r}; expected one of {BALANCE_METHODS}")
