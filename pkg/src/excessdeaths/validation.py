"""Input-validation helpers shared by the data types and estimators."""

from __future__ import annotations

import datetime as dt

import numpy as np

from .errors import AlignmentError, DomainError


def as_date(value) -> dt.date:
    """Coerce an ISO-8601 string or date/datetime into a ``datetime.date``."""
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value.strip())
        except ValueError as exc:
            raise DomainError(f"not an ISO-8601 date: {value!r}") from exc
    raise DomainError(f"cannot interpret {value!r} as a calendar date")


def check_finite(values: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{name} contains non-finite values")


def check_positive(values: np.ndarray, name: str) -> None:
    check_finite(values, name)
    if np.any(np.asarray(values) <= 0):
        raise DomainError(f"{name} must be strictly positive")


def check_counts(values: np.ndarray, name: str) -> np.ndarray:
    """Validate and return an integer array of nonnegative counts."""
    arr = np.asarray(values)
    if arr.size == 0:
        raise DomainError(f"{name} must contain at least one value")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.all(np.isfinite(arr)) or np.any(rounded != arr):
            raise DomainError(f"{name} must be integer counts")
        arr = rounded.astype(np.int64)
    if np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative")
    return arr.astype(np.int64)


def check_probability(alpha: float, name: str = "alpha") -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"{name} must lie strictly between 0 and 1, got {alpha}")
    return alpha


def check_alignment(*series) -> None:
    """Require identical start dates and lengths across dated series."""
    first = series[0]
    for other in series[1:]:
        if other.start_date != first.start_date or len(other) != len(first):
            raise AlignmentError(
                "series are misaligned: "
                f"{first.start_date}+{len(first)}d vs {other.start_date}+{len(other)}d"
            )
