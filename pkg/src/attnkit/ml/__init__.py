"""Modelling layer: design matrices, resampling, folds, models, metrics."""

from .balance import BALANCE_METHODS, RandomOverSampler, SmoteSampler, balance
from .design import Dataset, DesignMatrixBuilder, build_design_matrix
from .folds import Fold, leave_one_person_out, person_kfold
from .forest import GiniRandomForest
from .importance import permutation_importance, select_top_k
from .linear import GradientLogisticRegression
from .metrics import (DEFAULT_THRESHOLD_GRID, MetricsReport, ThresholdSweep,
                      above_chance, average_precision, evaluate_scores,
                      f1_score, roc_auc, threshold_sweep)
from .pipeline import (MODEL_KINDS, CrossValidationResult, FoldResult,
                       ModelSpec, cross_validate, make_model, model_from_json,
                       model_to_json, train_model)
from .stats import OlsResult, WelchResult, ols_fit, welch_t

__all__ = [
    "BALANCE_METHODS",
    "RandomOverSampler",
    "SmoteSampler",
    "balance",
    "Dataset",
    "DesignMatrixBuilder",
    "build_design_matrix",
    "Fold",
    "leave_one_person_out",
    "person_kfold",
    "GiniRandomForest",
    "permutation_importance",
    "select_top_k",
    "GradientLogisticRegression",
    "DEFAULT_THRESHOLD_GRID",
    "MetricsReport",
    "ThresholdSweep",
    "above_chance",
    "average_precision",
    "evaluate_scores",
    "f1_score",
    "roc_auc",
    "threshold_sweep",
    "MODEL_KINDS",
    "CrossValidationResult",
    "FoldResult",
    "ModelSpec",
    "cross_validate",
    "make_model",
    "model_from_json",
    "model_to_json",
    "train_model",
    "OlsResult",
    "WelchResult",
    "ols_fit",
    "welch_t",
]
