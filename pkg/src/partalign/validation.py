"""Small input-validation helpers used by the estimators and I/O layer."""

import numpy as np

from .errors import ValidationError


def check_finite(arr, name="array"):
    """Raise ValidationError if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_positive_int(value, name):
    if int(value) != value or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_samples(samples):
    """Coerce clustering samples to a finite (n, dim) float64 array, n >= 1."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"samples must form a non-empty 2-D array, got shape {arr.shape}")
    check_finite(arr, "samples")
    return np.ascontiguousarray(arr)


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise ValidationError(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")


def check_vector_pair(u, v):
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValidationError(f"vectors differ in dimension: {u.shape[0]} vs {v.shape[0]}")
    return u, v
