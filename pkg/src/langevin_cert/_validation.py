"""Small input-validation helpers shared by the public functions."""
from __future__ import annotations

import numbers

import numpy as np


def check_positive(name, value, allow_zero=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be finite and {bound}, got {value}")
    return value


def check_int(name, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_vectors(x, dim, name="x"):
    """Return ``x`` as a float array whose trailing axis has length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise ValueError(
            f"{name} must have trailing dimension {dim}, got shape {arr.shape}"
        )
    return arr


def check_phase_points(z, dim, name="points"):
    """Phase points are stored as rows ``(x, v)`` of length ``2 * dim``."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 * dim:
        raise ValueError(
            f"{name} must have shape (n, {2 * dim}), got {np.shape(z)}"
        )
    return arr
