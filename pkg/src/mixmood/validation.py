"""Input validation helpers shared by every module.

Feature matrices are canonically ``float32`` 2-D arrays (the on-disk
precision); distance accumulation upcasts to float64 internally.  Image
stacks are ``uint8`` arrays shaped (n, h, w, c) with c in {1, 3}.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

STD_FLOOR = 1e-8


def check_feature_matrix(values, name: str = "feature matrix") -> np.ndarray:
    """Validate and return a (rows, cols) float32 matrix of finite values."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must have at least 1 row and 1 column")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf values")
    return arr


def check_image_set(pixels, name: str = "image set") -> np.ndarray:
    """Validate and return an (n, h, w, c) uint8 image stack."""
    arr = np.asarray(pixels)
    if arr.ndim == 3:  # single-channel shorthand
        arr = arr[..., np.newaxis]
    if arr.ndim != 4:
        raise ValidationError(f"{name} must be (n, h, w, c), got shape {arr.shape}")
    n, h, w, c = arr.shape
    if n < 1 or h < 1 or w < 1:
        raise ValidationError(f"{name} has empty dimensions: {arr.shape}")
    if c not in (1, 3):
        raise ValidationError(f"{name} channel count must be 1 or 3, got {c}")
    if arr.dtype != np.uint8:
        info = np.iinfo(np.uint8)
        vals = np.asarray(arr)
        if not np.issubdtype(vals.dtype, np.integer):
            raise ValidationError(f"{name} must hold 8-bit integers")
        if vals.min() < info.min or vals.max() > info.max:
            raise ValidationError(f"{name} values must lie in [0, 255]")
        arr = vals.astype(np.uint8)
    return np.ascontiguousarray(arr)


def check_probability_vector(p, tol: float = 1e-9) -> np.ndarray:
    """Validate a non-negative vector summing to 1 within ``tol``."""
    vec = np.asarray(p, dtype=np.float64)
    if vec.ndim != 1 or vec.size < 1:
        raise ValidationError("probability vector must be 1-D and non-empty")
    if np.any(vec < 0):
        raise ValidationError("probability vector has negative entries")
    total = float(vec.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError(f"probability vector sums to {total!r}, expected 1")
    return vec
