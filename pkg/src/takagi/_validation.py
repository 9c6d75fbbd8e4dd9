"""Input checking helpers shared by the public functions and estimators."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

from .exceptions import ValidationError

# 2**-50: below this a tolerance cannot be met in double precision.
MIN_TOL = 2.0**-50


def check_tol(tol, name="tol"):
    if not isinstance(tol, Real) or not math.isfinite(tol) or tol <= 0:
        raise ValidationError(f"{name} must be a positive finite real, got {tol!r}")
    if tol < MIN_TOL:
        raise ValidationError(f"{name}={tol!r} is below double-precision resolution ({MIN_TOL:g})")
    return float(tol)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_nonneg_int(value, name):
    return check_positive_int(value, name, minimum=0)


def check_real(value, name):
    if isinstance(value, bool) or not isinstance(value, Real) or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite real, got {value!r}")
    return float(value)


def check_int_sequence(values, name, min_len=1):
    try:
        seq = [check_positive_int(v, name) for v in values]
    except TypeError as exc:
        raise ValidationError(f"{name} must be a sequence of integers") from exc
    if len(seq) < min_len:
        raise ValidationError(f"{name} needs at least {min_len} entries, got {len(seq)}")
    return seq


def check_x_array(X):
    """Accept a scalar, 1-d or (n, 1) array of abscissae and return a flat float array."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValidationError(f"expected a single feature column, got shape {arr.shape}")
        arr = arr[:, 0]
    elif arr.ndim > 2:
        raise ValidationError(f"expected at most 2 dimensions, got shape {arr.shape}")
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("abscissae must be finite")
    return arr
