"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


class SchemaError(ValueError):
    """A tabular input does not match its documented schema."""


class IngestError(ValueError):
    """A file parsed but violates an ingest invariant (ordering, ranges)."""


def as_float_array(x, name: str = "x", ndim: int | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, optionally enforcing dimensionality."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str = "x") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(*named_arrays) -> None:
    """check_same_length(("a", a), ("b", b), ...) -> None or ValueError."""
    lengths = {name: len(arr) for name, arr in named_arrays}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"length mismatch: {lengths}")


def check_binary_labels(y, name: str = "labels") -> np.ndarray:
    y = np.asarray(y)
    uniq = np.unique(y)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueError(f"{name} must be 0/1, got values {uniq}")
    return y.astype(np.int64)


def check_random_state(seed) -> np.random.Generator:
    """Accept an int seed, a Generator, or a sequence of ints; return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    return np.random.default_rng(list(seed))


def check_fitted(est, attrs) -> None:
    """Raise sklearn's NotFittedError when fitted attributes are absent."""
    from sklearn.exceptions import NotFittedError

    if isinstance(attrs, str):
        attrs = (attrs,)
    missing = [a for a in attrs if getattr(est, a, None) is None]
    if missing:
        raise NotFittedError(
            f"{type(est).__name__} is not fitted yet; call fit() before using it"
        )
