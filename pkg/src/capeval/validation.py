"""Input checking helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_matrix(X, name: str = "X", min_rows: int = 1, min_cols: int = 1) -> np.ndarray:
    """Coerce to a 2-d float64 array and verify shape and finiteness."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if arr.shape[1] < min_cols:
        raise ValueError(f"{name} needs at least {min_cols} columns, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_vector(y, name: str = "y", length: int | None = None) -> np.ndarray:
    """Coerce to a 1-d float64 array and verify length and finiteness."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def check_paired(x, y, names: tuple[str, str] = ("x", "y")) -> tuple[np.ndarray, np.ndarray]:
    """Validate two series of equal length, returned as float64 arrays."""
    a = check_vector(x, names[0])
    b = check_vector(y, names[1], length=a.shape[0])
    return a, b


def check_fraction(value: float, name: str = "fraction") -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {value}")
    return value
