"""L2-regularized logistic regression trained by full-batch gradient descent.

Deterministic by construction: weights start at zero and every epoch uses
the full batch, so the fit does not depend on the seed (the seed parameter
exists for interface uniformity with other models).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..validation import (as_float_array, check_binary_labels, check_finite,
                          check_fitted)

__all__ = ["GradientLogisticRegression"]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


class GradientLogisticRegression(BaseEstimator, ClassifierMixin):
    """Binary logistic regression, mean log-loss + (l2/2n)*||w||^2.

    Gradient step per epoch: w -= lr * (X.T @ (sigmoid(Xw + b) - y) / n
    + (l2/n) * w); the intercept is not regularized.
    """

    def __init__(self, l2: float = 1.0, epochs: int = 500,
                 learning_rate: float = 0.1, seed: int = 0):
        self.l2 = l2
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.coef_ = None
        self.intercept_ = None

    def fit(self, X, y):
        X = as_float_array(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        check_finite(X, "X")
        y = check_binary_labels(y)
        if len(y) != X.shape[0]:
            raise ValueError("X and y disagree on the number of rows")
        if len(np.unique(y)) < 2:
            raise ValueError("training labels contain a single class")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")

        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        yf = y.astype(np.float64)
        for _ in range(self.epochs):
            g = _sigmoid(X @ w + b) - yf
            grad_w = X.T @ g / n + (self.l2 / n) * w
            grad_b = float(g.mean())
            w = w - self.learning_rate * grad_w
            b = b - self.learning_rate * grad_b
        self.coef_ = w
        self.intercept_ = b
        return self

    def predict_scores(self, X) -> np.ndarray:
        """Class-1 probabilities."""
        check_fitted(self, ["coef_"])
        X = as_float_array(X, "X")
        if X.ndim != 2 or X.shape[1] != len(self.coef_):
            raise ValueError("X has a different number of columns than fit saw")
        return _sigmoid(X @ self.coef_ + self.intercept_)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_scores(X) >= threshold).astype(np.int64)

    def to_dict(self) -> dict:
        check_fitted(self, ["coef_"])
        return {
            "kind": "logistic_regression",
            "hyperparameters": {"l2": self.l2, "epochs": self.epochs,
                                "learning_rate": self.learning_rate,
                                "seed": self.seed},
            "coefficients": [float(c) for c in self.coef_],
            "intercept": float(self.intercept_),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GradientLogisticRegression":
        if payload.get("kind") != "logistic_regression":
            raise ValueError("payload does not describe a logistic regression")
        hp = payload["hyperparameters"]
        model = cls(l2=hp["l2"], epochs=hp["epochs"],
                    learning_rate=hp["learning_rate"], seed=hp["seed"])
        model.coef_ = np.asarray(payload["coefficients"], dtype=np.float64)
        model.intercept_ = float(payload["intercept"])
        return model
