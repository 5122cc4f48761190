"""End-to-end training and person-level cross-validation.

Every fold refits the design-matrix preprocessing on its training rows
only, optionally rebalances the training classes, trains a fresh model
seeded with spec.seed + fold_index, and scores the held-out rows.  The
aggregate report pools the out-of-fold scores, so each row is scored by a
model that never saw its person.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..validation import check_binary_labels
from .balance import balance
from .design import Dataset, DesignMatrixBuilder
from .folds import Fold, leave_one_person_out, person_kfold
from .forest import GiniRandomForest
from .linear import GradientLogisticRegression
from .metrics import MetricsReport, evaluate_scores

__all__ = [
    "MODEL_KINDS",
    "ModelSpec",
    "make_model",
    "train_model",
    "FoldResult",
    "CrossValidationResult",
    "cross_validate",
    "model_to_json",
    "model_from_json",
]

MODEL_KINDS = ("logistic_regression", "random_forest")


@dataclass(frozen=True)
class ModelSpec:
    """Which model to train and with which hyperparameters; seed is required."""

    kind: str
    seed: int
    l2: float = 1.0
    epochs: int = 500
    learning_rate: float = 0.1
    n_trees: int = 100
    max_depth: int = 50
    class_weight: str | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if not isinstance(self.seed, (int, np.integer)):
            raise ValueError("seed must be an integer")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": int(self.seed),
            "l2": self.l2,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "class_weight": self.class_weight,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelSpec":
        return cls(**payload)


def make_model(spec: ModelSpec, seed=None):
    """Instantiate an unfitted model; seed overrides spec.seed when given."""
    use_seed = int(spec.seed if seed is None else seed)
    if spec.kind == "logistic_regression":
        return GradientLogisticRegression(l2=spec.l2, epochs=spec.epochs,
                                          learning_rate=spec.learning_rate,
                                          seed=use_seed)
    return GiniRandomForest(n_trees=spec.n_trees, max_depth=spec.max_depth,
                            class_weight=spec.class_weight, seed=use_seed)


def train_model(X, y, spec: ModelSpec, seed=None):
    """Fit a fresh model from the spec on (X, y)."""
    return make_model(spec, seed=seed).fit(X, y)


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    test_persons: tuple
    test_idx: np.ndarray
    scores: np.ndarray
    report: MetricsReport


@dataclass(frozen=True)
class CrossValidationResult:
    folds: tuple
    aggregate: MetricsReport
    pooled_scores: np.ndarray
    labels: np.ndarray

    def as_dict(self) -> dict:
        return {
            "aggregate": self.aggregate.as_dict(),
            "folds": [
                {"fold_index": f.fold_index,
                 "test_persons": list(f.test_persons),
                 "report": f.report.as_dict()}
                for f in self.folds
            ],
        }


def cross_validate(dataset: Dataset, spec: ModelSpec, scheme: str = "lopo",
                   k: int = 4, balance_method: str = "none", smote_k: int = 5,
                   threshold: float = 0.5, impute: str = "mean",
                   scale: bool = True, drop_zero_variance: bool = True,
                   use_groups: bool = True) -> CrossValidationResult:
    """Person-level cross-validation with leak-free preprocessing.

    scheme is "lopo" (leave one person out) or "kfold" (k groups of whole
    persons, shuffled with spec.seed).  Fold i trains with seed
    spec.seed + i so folds are decorrelated but the whole run is
    reproducible.
    """
    labels = check_binary_labels(dataset.labels)
    if scheme == "lopo":
        folds = leave_one_person_out(dataset.person_ids)
    elif scheme == "kfold":
        folds = person_kfold(dataset.person_ids, k=k, seed=spec.seed)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected 'lopo' or 'kfold'")

    pooled = np.full(dataset.n_rows, np.nan)
    fold_results = []
    for i, fold in enumerate(folds):
        fold_seed = int(spec.seed) + i
        builder = DesignMatrixBuilder(impute=impute, scale=scale,
                                      drop_zero_variance=drop_zero_variance)
        builder.fit(dataset.matrix[fold.train_idx],
                    feature_names=dataset.feature_names)
        X_train = builder.transform(dataset.matrix[fold.train_idx])
        X_test = builder.transform(dataset.matrix[fold.test_idx])
        y_train = labels[fold.train_idx]
        y_test = labels[fold.test_idx]
        X_train, y_train = balance(X_train, y_train, method=balance_method,
                                   k=smote_k, seed=fold_seed)
        model = train_model(X_train, y_train, spec, seed=fold_seed)
        scores = model.predict_scores(X_test)
        report = evaluate_scores(scores, y_test, threshold=threshold)
        pooled[fold.test_idx] = scores
        fold_results.append(FoldResult(fold_index=i, test_persons=fold.test_persons,
                                       test_idx=fold.test_idx, scores=scores,
                                       report=report))

    if np.isnan(pooled).any():
        raise RuntimeError("cross-validation folds did not cover every row")
    groups = dataset.groups if (use_groups and dataset.groups is not None) else None
    aggregate = evaluate_scores(pooled, labels, threshold=threshold, groups=groups)
    return CrossValidationResult(folds=tuple(fold_results), aggregate=aggregate,
                                 pooled_scores=pooled, labels=labels)


def model_to_json(model, builder: DesignMatrixBuilder | None = None,
                  spec: ModelSpec | None = None) -> str:
    """Serialize a fitted model (plus optional transform/spec) to stable JSON.

    Keys are sorted and floats keep full repr precision, so equal models
    produce byte-identical text.
    """
    payload = {"model": model.to_dict()}
    if builder is not None:
        payload["transform"] = builder.record()
    if spec is not None:
        payload["spec"] = spec.as_dict()
    return json.dumps(payload, sort_keys=True, indent=2)


def model_from_json(text: str):
    """Inverse of model_to_json: returns (model, builder_or_None, spec_or_None)."""
    payload = json.loads(text)
    kind = payload["model"].get("kind")
    if kind == "logistic_regression":
        model = GradientLogisticRegression.from_dict(payload["model"])
    elif kind == "random_forest":
        model = GiniRandomForest.from_dict(payload["model"])
    else:
        raise ValueError(f"unknown model kind {kind!r} in payload")
    builder = (DesignMatrixBuilder.from_record(payload["transform"])
               if "transform" in payload else None)
    spec = ModelSpec.from_dict(payload["spec"]) if "spec" in payload else None
    return model, builder, spec
