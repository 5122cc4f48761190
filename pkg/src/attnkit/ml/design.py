"""Design-matrix assembly: feature vectors to a clean numeric matrix.

Missing entries are NaN in the raw matrix.  The builder learns its
preprocessing (drop all-missing columns, mean-impute, z-scale, drop
zero-variance columns) from the fit partition only and then applies it
unchanged, so test rows never leak into the learned statistics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..validation import as_float_array, check_fitted

__all__ = ["Dataset", "DesignMatrixBuilder", "build_design_matrix"]


@dataclass(frozen=True)
class Dataset:
    """Aligned rows of features, labels, and identity for modelling."""

    person_ids: tuple
    probe_ids: tuple
    matrix: np.ndarray          # (n_rows, n_features) float, NaN = missing
    feature_names: tuple
    labels: np.ndarray          # (n_rows,) int 0/1
    groups: tuple | None = None

    def __post_init__(self):
        n = self.matrix.shape[0]
        if len(self.person_ids) != n or len(self.probe_ids) != n or len(self.labels) != n:
            raise ValueError("person_ids, probe_ids, labels, and matrix rows must align")
        if self.groups is not None and len(self.groups) != n:
            raise ValueError("groups must align with matrix rows")
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.feature_names):
            raise ValueError("matrix columns must match feature_names")

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def persons(self) -> tuple:
        return tuple(sorted(set(self.person_ids)))

    @classmethod
    def from_feature_vectors(cls, feature_vectors, labels, groups=None,
                             feature_names=None) -> "Dataset":
        """Stack per-window feature vectors into a row-aligned dataset.

        Column order is the sorted union of feature names unless an explicit
        order is given; absent or None values become NaN.
        """
        fvs = list(feature_vectors)
        if not fvs:
            raise ValueError("feature_vectors must be non-empty")
        labels = np.asarray(labels)
        if len(labels) != len(fvs):
            raise ValueError("labels must align with feature_vectors")
        if feature_names is None:
            names: set = set()
            for fv in fvs:
                names.update(fv.values.keys())
            feature_names = tuple(sorted(names))
        else:
            feature_names = tuple(feature_names)
        matrix = np.full((len(fvs), len(feature_names)), np.nan)
        for i, fv in enumerate(fvs):
            for j, name in enumerate(feature_names):
                v = fv.values.get(name)
                if v is not None:
                    matrix[i, j] = v
        return cls(
            person_ids=tuple(fv.person_id for fv in fvs),
            probe_ids=tuple(fv.probe_id for fv in fvs),
            matrix=matrix,
            feature_names=feature_names,
            labels=labels.astype(np.int64),
            groups=None if groups is None else tuple(groups),
        )


class DesignMatrixBuilder(BaseEstimator, TransformerMixin):
    """Learn imputation/scaling on a fit partition; apply it anywhere.

    Fit order: drop columns that are entirely missing (with a warning),
    mean-impute the rest, z-scale (population sd), then drop columns whose
    scaled variance is zero.  ``transform`` replays the learned steps.
    """

    def __init__(self, impute: str = "mean", scale: bool = True,
                 drop_zero_variance: bool = True):
        self.impute = impute
        self.scale = scale
        self.drop_zero_variance = drop_zero_variance
        self.feature_names_ = None
        self.kept_names_ = None
        self.keep_idx_ = None
        self.fill_ = None
        self.center_ = None
        self.spread_ = None

    def fit(self, X, y=None, feature_names=None):
        X = as_float_array(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if X.shape[0] == 0:
            raise ValueError("X must have at least one row")
        if self.impute != "mean":
            raise ValueError(f"unknown imputation {self.impute!r}")
        n, d = X.shape
        if feature_names is None:
            feature_names = tuple(f"f{j}" for j in range(d))
        else:
            feature_names = tuple(feature_names)
            if len(feature_names) != d:
                raise ValueError("feature_names length must match columns")

        observed = ~np.isnan(X)
        all_missing = ~observed.any(axis=0)
        if all_missing.any():
            dropped = [feature_names[j] for j in np.flatnonzero(all_missing)]
            warnings.warn("dropping all-missing columns: " + ", ".join(dropped))

        keep = ~all_missing
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fill = np.nanmean(X, axis=0)
        fill = np.where(keep, fill, 0.0)

        imputed = np.where(np.isnan(X), fill[None, :], X)
        center = imputed.mean(axis=0)
        spread = imputed.std(axis=0)      # population sd
        if self.drop_zero_variance:
            keep &= spread > 0.0
        safe_spread = np.where(spread > 0.0, spread, 1.0)

        self.feature_names_ = feature_names
        self.keep_idx_ = np.flatnonzero(keep)
        self.kept_names_ = tuple(feature_names[j] for j in self.keep_idx_)
        self.fill_ = fill[self.keep_idx_]
        self.center_ = center[self.keep_idx_]
        self.spread_ = safe_spread[self.keep_idx_]
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, ["keep_idx_"])
        X = as_float_array(X, "X")
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if X.shape[1] != len(self.feature_names_):
            raise ValueError("X has a different number of columns than fit saw")
        sub = X[:, self.keep_idx_]
        sub = np.where(np.isnan(sub), self.fill_[None, :], sub)
        if self.scale:
            sub = (sub - self.center_[None, :]) / self.spread_[None, :]
        return sub

    def record(self) -> dict:
        """JSON-ready description of the learned transform."""
        check_fitted(self, ["keep_idx_"])
        return {
            "impute": self.impute,
            "scale": self.scale,
            "drop_zero_variance": self.drop_zero_variance,
            "feature_names": list(self.feature_names_),
            "kept_names": list(self.kept_names_),
            "keep_idx": [int(j) for j in self.keep_idx_],
            "fill": [float(v) for v in self.fill_],
            "center": [float(v) for v in self.center_],
            "spread": [float(v) for v in self.spread_],
        }

    @classmethod
    def from_record(cls, record: dict) -> "DesignMatrixBuilder":
        builder = cls(impute=record["impute"], scale=record["scale"],
                      drop_zero_variance=record["drop_zero_variance"])
        builder.feature_names_ = tuple(record["feature_names"])
        builder.kept_names_ = tuple(record["kept_names"])
        builder.keep_idx_ = np.asarray(record["keep_idx"], dtype=np.int64)
        builder.fill_ = np.asarray(record["fill"], dtype=np.float64)
        builder.center_ = np.asarray(record["center"], dtype=np.float64)
        builder.spread_ = np.asarray(record["spread"], dtype=np.float64)
        return builder


def build_design_matrix(dataset: Dataset, train_mask=None, impute: str = "mean",
                        scale: bool = True, drop_zero_variance: bool = True):
    """Fit a builder on the masked rows (all rows by default), transform all.

    Returns (matrix, builder).
    """
    builder = DesignMatrixBuilder(impute=impute, scale=scale,
                                  drop_zero_variance=drop_zero_variance)
    if train_mask is None:
        fit_rows = dataset.matrix
    else:
        train_mask = np.asarray(train_mask)
        fit_rows = dataset.matrix[train_mask]
    builder.fit(fit_rows, feature_names=dataset.feature_names)
    return builder.transform(dataset.matrix), builder
