"""Random forest of Gini-split decision trees for binary labels.

Determinism: tree t draws its bootstrap and feature subsets from a
generator seeded with (seed, t), so a fitted forest is a pure function of
the data, the hyperparameters, and the seed.  Trees are stored as nested
dicts (JSON-ready); the forest score for a row is the fraction of trees
voting class 1.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..validation import (as_float_array, check_binary_labels, check_finite,
                          check_fitted)

__all__ = ["GiniRandomForest"]


def _leaf(y: np.ndarray, w: np.ndarray) -> dict:
    w1 = float(w[y == 1].sum())
    w0 = float(w.sum()) - w1
    # weighted majority; ties go to the smaller class label
    cls = 0 if w0 >= w1 else 1
    return {"leaf": True, "class": cls, "weight": {"0": w0, "1": w1}}


class GiniRandomForest(BaseEstimator, ClassifierMixin):
    """Bagged axis-aligned trees split by weighted Gini impurity.

    Each node evaluates max(1, int(sqrt(d))) candidate features drawn
    without replacement; thresholds are midpoints between consecutive
    distinct sorted values; rows with value <= threshold go left.  With
    class_weight="balanced" every sample carries weight n/(2 * count of its
    class), computed on the full training labels before bootstrapping.
    """

    def __init__(self, n_trees: int = 100, max_depth: int = 50,
                 max_features: str = "sqrt", class_weight=None,
                 min_samples_split: int = 2, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.class_weight = class_weight
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.trees_ = None
        self.n_features_ = None

    # ---- fitting -------------------------------------------------------

    def fit(self, X, y):
        X = as_float_array(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        check_finite(X, "X")
        y = check_binary_labels(y)
        if len(y) != X.shape[0]:
            raise ValueError("X and y disagree on the number of rows")
        classes = np.unique(y)
        if len(classes) < 2:
            raise ValueError("training labels contain a single class")
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.max_features != "sqrt":
            raise ValueError(f"unknown max_features {self.max_features!r}")
        if self.class_weight not in (None, "balanced"):
            raise ValueError(f"unknown class_weight {self.class_weight!r}")

        n, d = X.shape
        if self.class_weight == "balanced":
            counts = {int(c): int((y == c).sum()) for c in classes}
            per_class = {c: n / (2.0 * cnt) for c, cnt in counts.items()}
            sample_weight = np.array([per_class[int(c)] for c in y])
        else:
            sample_weight = np.ones(n)

        self.n_features_ = d
        self._m = max(1, int(np.sqrt(d)))
        trees = []
        for t in range(self.n_trees):
            rng = np.random.default_rng((self.seed, t))
            boot = rng.integers(0, n, n)
            trees.append(self._grow(X[boot], y[boot], sample_weight[boot], 0, rng))
        self.trees_ = trees
        return self

    def _grow(self, X, y, w, depth, rng) -> dict:
        if (depth >= self.max_depth or len(y) < self.min_samples_split
                or len(np.unique(y)) == 1):
            return _leaf(y, w)
        split = self._best_split(X, y, w, rng)
        if split is None:
            return _leaf(y, w)
        _, feature, threshold = split
        mask = X[:, feature] <= threshold
        return {
            "feature": int(feature),
            "threshold": float(threshold),
            "left": self._grow(X[mask], y[mask], w[mask], depth + 1, rng),
            "right": self._grow(X[~mask], y[~mask], w[~mask], depth + 1, rng),
        }

    def _best_split(self, X, y, w, rng):
        total_w = w.sum()
        total_w1 = w[y == 1].sum()
        total_w0 = total_w - total_w1
        parent = 1.0 - (total_w1 / total_w) ** 2 - (total_w0 / total_w) ** 2
        features = rng.choice(self.n_features_, self._m, replace=False)
        best = None
        for f in features:
            xf = X[:, f]
            order = np.argsort(xf, kind="stable")
            xs = xf[order]
            ws = w[order]
            w1s = ws * (y[order] == 1)
            cw = np.cumsum(ws)
            cw1 = np.cumsum(w1s)
            cut = np.flatnonzero(xs[:-1] < xs[1:])
            if len(cut) == 0:
                continue
            w_left = cw[cut]
            w1_left = cw1[cut]
            w0_left = w_left - w1_left
            w_right = total_w - w_left
            w1_right = total_w1 - w1_left
            w0_right = total_w0 - w0_left
            gini_left = 1.0 - (w1_left / w_left) ** 2 - (w0_left / w_left) ** 2
            gini_right = 1.0 - (w1_right / w_right) ** 2 - (w0_right / w_right) ** 2
            weighted = (w_left * gini_left + w_right * gini_right) / total_w
            j = int(np.argmin(weighted))   # first minimum: smallest threshold
            # strict < keeps the earliest candidate feature on exact ties
            if best is None or weighted[j] < best[0]:
                threshold = 0.5 * (xs[cut[j]] + xs[cut[j] + 1])
                best = (float(weighted[j]), int(f), float(threshold))
        if best is None or best[0] >= parent - 1e-12:
            return None
        return best

    # ---- prediction ----------------------------------------------------

    @staticmethod
    def _tree_class(node: dict, row: np.ndarray) -> int:
        while "leaf" not in node:
            node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
        return node["class"]

    def predict_scores(self, X) -> np.ndarray:
        """Fraction of trees voting class 1 for each row."""
        check_fitted(self, ["trees_"])
        X = as_float_array(X, "X")
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError("X has a different number of columns than fit saw")
        scores = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            votes = sum(self._tree_class(tree, X[i]) for tree in self.trees_)
            scores[i] = votes / len(self.trees_)
        return scores

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_scores(X) >= threshold).astype(np.int64)

    # ---- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        check_fitted(self, ["trees_"])
        return {
            "kind": "random_forest",
            "hyperparameters": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "max_features": self.max_features,
                "class_weight": self.class_weight,
                "min_samples_split": self.min_samples_split,
                "seed": self.seed,
            },
            "n_features": self.n_features_,
            "trees": self.trees_,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GiniRandomForest":
        if payload.get("kind") != "random_forest":
            raise ValueError("payload does not describe a random forest")
        hp = payload["hyperparameters"]
        model = cls(n_trees=hp["n_trees"], max_depth=hp["max_depth"],
                    max_features=hp["max_features"], class_weight=hp["class_weight"],
                    min_samples_split=hp["min_samples_split"], seed=hp["seed"])
        model.n_features_ = payload["n_features"]
        model.trees_ = payload["trees"]
        return model
