"""Small statistical utilities: Welch's t and ordinary least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..validation import as_float_array, check_finite

__all__ = ["WelchResult", "welch_t", "OlsResult", "ols_fit"]


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    mean_x: float
    mean_y: float


def welch_t(x, y) -> WelchResult:
    """Welch's unequal-variance t statistic with Welch-Satterthwaite df."""
    x = as_float_array(x, "x", ndim=1)
    y = as_float_array(y, "y", ndim=1)
    check_finite(x, "x")
    check_finite(y, "y")
    if len(x) < 2 or len(y) < 2:
        raise ValueError("welch_t needs at least two observations per group")
    vx = float(np.var(x, ddof=1))
    vy = float(np.var(y, ddof=1))
    if vx == 0.0 and vy == 0.0:
        raise ValueError("zero variance in both groups")
    nx, ny = len(x), len(y)
    se2 = vx / nx + vy / ny
    t = (float(np.mean(x)) - float(np.mean(y))) / np.sqrt(se2)
    df = se2 ** 2 / ((vx / nx) ** 2 / (nx - 1) + (vy / ny) ** 2 / (ny - 1))
    return WelchResult(t=float(t), df=float(df),
                       mean_x=float(np.mean(x)), mean_y=float(np.mean(y)))


@dataclass(frozen=True)
class OlsResult:
    coefficients: tuple      # (intercept, slopes...) when add_intercept
    r_squared: float
    feature_names: tuple


def ols_fit(X, y, add_intercept: bool = True, feature_names=None) -> OlsResult:
    """Least-squares linear fit with explicit rank-deficiency reporting.

    A rank-deficient design raises ValueError naming the columns that are
    linearly dependent on earlier ones (greedy left-to-right scan).  R^2 is
    1 - SSres/SStot, and 0 by convention when y is constant.
    """
    X = as_float_array(X, "X")
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("X must be 1-D or 2-D")
    y = as_float_array(y, "y", ndim=1)
    check_finite(X, "X")
    check_finite(y, "y")
    if len(y) != X.shape[0]:
        raise ValueError("X and y disagree on the number of rows")

    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(X.shape[1]))
    else:
        feature_names = tuple(feature_names)
        if len(feature_names) != X.shape[1]:
            raise ValueError("feature_names length must match the number of columns")

    if add_intercept:
        design = np.hstack([np.ones((X.shape[0], 1)), X])
        names = ("intercept",) + feature_names
    else:
        design = X
        names = feature_names

    if design.shape[0] <= design.shape[1]:
        raise ValueError("need more rows than coefficients")

    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        dependent = []
        kept: list[int] = []
        for j in range(design.shape[1]):
            sub = design[:, kept + [j]]
            if np.linalg.matrix_rank(sub) > len(kept):
                kept.append(j)
            else:
                dependent.append(names[j])
        raise ValueError("rank-deficient design: dependent columns "
                         + ", ".join(dependent))

    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    ss_res = float(residuals @ residuals)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        r2 = 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return OlsResult(coefficients=tuple(float(c) for c in coef),
                     r_squared=float(min(1.0, max(0.0, r2))),
                     feature_names=names)
