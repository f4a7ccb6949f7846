"""Input checks shared by the samplers and estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_points(X, *, closed: bool = False) -> np.ndarray:
    """2-D float array with every coordinate in [0, 1) (or [0, 1] if closed)."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=0)
    upper_ok = X <= 1.0 if closed else X < 1.0
    if X.size and not (np.all(X >= 0.0) and np.all(upper_ok)):
        raise ValueError("points must lie in the unit cube [0, 1)^d")
    return X


def check_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_box(lower, upper):
    lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower and upper must be 1-D vectors of equal length")
    if np.any(lower >= upper):
        raise ValueError("box bounds must satisfy lower < upper componentwise")
    return lower, upper
