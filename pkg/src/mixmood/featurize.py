"""Image preprocessing, pluggable feature extractors and noise datasets.

Preprocessing follows a one-scalar-pair-per-split convention: a single
(mean, std) pair is computed over every pixel of a split and applied to
all of its images.  Extractors are sklearn-style transformers: ``fit``
learns the split statistics, ``transform`` standardizes and maps images
to feature rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ExtractorError, ValidationError
from .onnx_mini import OnnxModelRunner
from .rng import PortableRng
from .validation import STD_FLOOR, check_feature_matrix, check_image_set

NOISE_SIDE = 224  # default synthetic-noise image size
GAUSS_NOISE_STD = math.sqrt(10.0)


@dataclass(frozen=True)
class PreprocessStats:
    """Scalar standardization pair for one data split."""

    mean: float
    std: float

    def __post_init__(self):
        if not (self.std >= STD_FLOOR):
            raise ValidationError(f"std must be >= {STD_FLOOR}, got {self.std}")


def compute_stats(images) -> PreprocessStats:
    """Mean and standard deviation over all pixel values of a split."""
    arr = check_image_set(images)
    flat = arr.astype(np.float64).ravel()
    mean = float(flat.mean())
    std = float(flat.std())
    return PreprocessStats(mean=mean, std=max(std, STD_FLOOR))


def standardize(images, stats: PreprocessStats) -> np.ndarray:
    """(pixel - mean) / std as a float64 stack of the same shape."""
    arr = check_image_set(images)
    return (arr.astype(np.float64) - stats.mean) / stats.std


def resize(images, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbour resampling to (target_h, target_w).

    Target index i maps to source index floor((i + 0.5) * src / dst);
    unchanged dimensions return the input bit-identically.
    """
    arr = check_image_set(images)
    if target_h < 1 or target_w < 1:
        raise ValidationError("target dimensions must be >= 1")
    n, h, w, c = arr.shape
    if (h, w) == (target_h, target_w):
        return arr.copy()
    rows = np.minimum(((np.arange(target_h) + 0.5) * h / target_h).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(target_w) + 0.5) * w / target_w).astype(np.int64), w - 1)
    return np.ascontiguousarray(arr[:, rows][:, :, cols])


class _Extractor(BaseEstimator, TransformerMixin):
    """Shared fit/transform plumbing for all extractors."""

    def fit(self, X, y=None):
        self.stats_ = compute_stats(X)
        return self

    def transform(self, X):
        if not hasattr(self, "stats_"):
            raise ValidationError(f"{type(self).__name__} is not fitted yet")
        return extract_features(X, self, self.stats_)

    def _map(self, standardized: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FlattenFeatures(_Extractor):
    """Each image becomes its standardized pixels, row-major."""

    def _map(self, standardized):
        return standardized.reshape(standardized.shape[0], -1)


class RandomProjectionFeatures(_Extractor):
    """Standardized-flattened pixels times a seeded Gaussian projection.

    The projection matrix has N(0, 1/n_features) entries drawn row-major
    from ``PortableRng(seed)``, so it is fully determined by (input
    dimension, n_features, seed).
    """

    def __init__(self, n_features: int = 512, seed: int = 0):
        self.n_features = n_features
        self.seed = seed

    def projection_matrix(self, input_dim: int) -> np.ndarray:
        if self.n_features < 1:
            raise ValidationError("n_features must be >= 1")
        rng = PortableRng(self.seed)
        flat = rng.normal(input_dim * self.n_features)
        return flat.reshape(input_dim, self.n_features) / math.sqrt(self.n_features)

    def _map(self, standardized):
        flat = standardized.reshape(standardized.shape[0], -1)
        return flat @ self.projection_matrix(flat.shape[1])


class OnnxModelFeatures(_Extractor):
    """Features from an external model file run by the embedded runner.

    The standardized stack is fed as float32, shaped (batch, h*w*c) --
    the layout produced by row-major flattening.  The model must return
    (batch, output_dim) or a flat vector per sample.
    """

    def __init__(self, model_path=None, output_dim: int = 512):
        self.model_path = model_path
        self.output_dim = output_dim

    def _map(self, standardized):
        if self.model_path is None:
            raise ExtractorError("model_path is required for the external extractor")
        runner = OnnxModelRunner(self.model_path)
        flat = standardized.reshape(standardized.shape[0], -1).astype(np.float32)
        out = np.asarray(runner.run(flat), dtype=np.float64)
        if out.ndim == 1:
            out = out.reshape(standardized.shape[0], -1)
        if out.ndim != 2 or out.shape[0] != standardized.shape[0]:
            raise ExtractorError(
                f"model output shape {out.shape} does not match batch size "
                f"{standardized.shape[0]}"
            )
        if out.shape[1] != self.output_dim:
            raise ExtractorError(
                f"model returned {out.shape[1]} features per image, "
                f"declared output_dim is {self.output_dim}"
            )
        return out


def extract_features(images, extractor: _Extractor, stats: PreprocessStats) -> np.ndarray:
    """One float32 feature row per image, deterministic in all arguments."""
    standardized = standardize(images, stats)
    feats = extractor._map(standardized)
    return check_feature_matrix(feats, name="extracted features")


def gen_gaussian_noise(n: int, h: int = NOISE_SIDE, w: int = NOISE_SIDE, seed: int = 0) -> np.ndarray:
    """Grayscale noise: per pixel N(0, 10), clipped to [0, 255], rounded."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = PortableRng(seed)
    vals = rng.normal(n * h * w) * GAUSS_NOISE_STD
    pixels = np.clip(np.rint(vals), 0, 255).astype(np.uint8)
    return pixels.reshape(n, h, w, 1)


def gen_sap_noise(n: int, h: int = NOISE_SIDE, w: int = NOISE_SIDE, seed: int = 0) -> np.ndarray:
    """Grayscale salt-and-pepper noise: each pixel 0 or 255, p = 1/2 each."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = PortableRng(seed)
    bits = rng.integers_below(2, n * h * w)
    return (bits.astype(np.uint8) * 255).reshape(n, h, w, 1)
