"""Input validation helpers shared by the estimator-style API."""

from __future__ import annotations

import numpy as np

from .volume import BinaryVolume, Volume


def check_volume(x) -> Volume:
    """Coerce a Volume or bare 3D array into a validated Volume."""
    if isinstance(x, Volume):
        return x
    if isinstance(x, BinaryVolume):
        raise TypeError("expected an intensity volume, got a BinaryVolume")
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3D volume, got shape {arr.shape}")
    return Volume(arr)


def check_binary_volume(x) -> BinaryVolume:
    if isinstance(x, BinaryVolume):
        return x
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3D label field, got shape {arr.shape}")
    return BinaryVolume(arr)


def check_slice(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValueError(f"expected a non-empty 2D slice, got shape {arr.shape}")
    return arr


def check_odd(name: str, value) -> int:
    v = int(value)
    if v != value or v < 1 or v % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= 1, got {value!r}")
    return v


def check_positive(name: str, value) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return v


def check_nonneg_int(name: str, value) -> int:
    v = int(value)
    if v != value or v < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
    return v


def check_unit_interval(name: str, value, *, upper: float = 1.0) -> float:
    v = float(value)
    if not 0.0 < v <= upper:
        raise ValueError(f"{name} must lie in (0, {upper}], got {value!r}")
    return v


def check_connectivity(value) -> int:
    v = int(value)
    if v not in (6, 18, 26):
        raise ValueError(f"connectivity must be 6, 18 or 26, got {value!r}")
    return v
