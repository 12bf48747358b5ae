"""Small input-checking helpers shared across modules."""

from __future__ import annotations

import numbers

import numpy as np


def check_finite_nonneg(name: str, value, *, strict: bool = False) -> np.ndarray:
    """Return ``value`` as a float array after checking finiteness and sign.

    Parameters
    ----------
    name : str
        Argument name used in error messages.
    value : array_like
        Values to check.
    strict : bool, default False
        Require strictly positive entries.

    Raises
    ------
    ValueError
        On NaN, infinities or entries of the wrong sign.
    """
    arr = np.asarray(value, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    if np.any(~np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if strict and np.any(arr <= 0):
        raise ValueError(f"{name} must be positive")
    if not strict and np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


def check_positive_scalar(name: str, value) -> float:
    """Return a finite positive float or raise ``ValueError``."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    x = float(value)
    if not np.isfinite(x) or x <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return x


def check_int(name: str, value, *, minimum: int | None = None) -> int:
    """Return ``value`` as ``int`` after checking type and lower bound."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    v = int(value)
    if minimum is not None and v < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {v}")
    return v
