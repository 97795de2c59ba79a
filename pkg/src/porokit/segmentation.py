"""Intensity histogram and unbalanced-Otsu binarization.

The threshold criterion models the two intensity classes as Gaussians
with equal variances but unequal weights and maximizes the mixture
log-likelihood

    J(t) = w0*ln(w0) + w1*ln(w1) - 0.5*ln(w0*v0 + w1*v1)

over all 255 cut positions, where w_i are class probability masses and
v_i the within-class variances. Cuts that leave a class empty are
invalid; cuts that separate the classes perfectly (pooled variance zero)
score +inf, so a clean two-level image splits exactly. Ties resolve to
the smallest threshold. Material is the high-intensity class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .validation import check_volume
from .volume import BinaryVolume

N_BINS = 256

# pooled variances at or below this are treated as perfect separation
_VARIANCE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Histogram:
    """256-bin intensity histogram (bin b counts voxels rounding to b)."""

    bins: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bins, dtype=np.int64)
        if arr.shape != (N_BINS,):
            raise ValueError(f"histogram must have {N_BINS} bins, got shape {arr.shape}")
        if arr.min() < 0:
            raise ValueError("histogram counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "bins", arr)

    @property
    def total(self) -> int:
        return int(self.bins.sum())

    @property
    def n_occupied(self) -> int:
        return int((self.bins > 0).sum())


def intensity_histogram(volume) -> Histogram:
    vol = check_volume(volume)
    if vol.data.min() < 0.0 or vol.data.max() > 255.0:
        raise ValueError("histogram requires intensities within [0, 255]")
    idx = np.floor(vol.data + 0.5).astype(np.int64)  # half away from zero
    return Histogram(np.bincount(idx.ravel(), minlength=N_BINS))


def criterion_curve(hist: Histogram) -> np.ndarray:
    """Log-likelihood J for every cut t in [0, 254]; -inf marks invalid cuts."""
    counts = hist.bins.astype(np.float64)
    total = counts.sum()
    levels = np.arange(N_BINS, dtype=np.float64)
    c = np.cumsum(counts)
    m = np.cumsum(counts * levels)
    q = np.cumsum(counts * levels * levels)

    n0 = c[:-1]
    n1 = total - n0
    curve = np.full(N_BINS - 1, -np.inf)
    valid = (n0 > 0) & (n1 > 0)
    if not valid.any():
        return curve

    with np.errstate(divide="ignore", invalid="ignore"):
        w0 = n0 / total
        w1 = n1 / total
        m0 = m[:-1] / n0
        m1 = (m[-1] - m[:-1]) / n1
        v0 = q[:-1] / n0 - m0 * m0
        v1 = (q[-1] - q[:-1]) / n1 - m1 * m1
        pooled = w0 * v0 + w1 * v1
        j = w0 * np.log(w0) + w1 * np.log(w1) - 0.5 * np.log(pooled)

    pure = valid & (pooled <= _VARIANCE_FLOOR)
    curve[valid] = j[valid]
    curve[pure] = np.inf
    return curve


def unbalanced_otsu_threshold(hist: Histogram) -> int:
    """Cut position maximizing the mixture likelihood (smallest on ties)."""
    if hist.n_occupied < 2:
        raise ValueError("histogram is degenerate: needs mass in at least 2 bins")
    curve = criterion_curve(hist)
    return int(np.argmax(curve))


def binarize(volume, threshold: float) -> BinaryVolume:
    """Label voxels above the threshold as material (1), the rest as pore (0)."""
    vol = check_volume(volume)
    t = float(threshold)
    if not 0.0 <= t <= 255.0:
        raise ValueError(f"threshold must lie in [0, 255], got {threshold!r}")
    return BinaryVolume(vol.data > t)


class UnbalancedOtsu(BaseEstimator):
    """Estimator wrapper: fit computes the threshold, transform binarizes.

    Attributes after fit: ``histogram_``, ``threshold_`` and ``criterion_``
    (the J value attained at the threshold).
    """

    def fit(self, X, y=None):
        vol = check_volume(X)
        self.histogram_ = intensity_histogram(vol)
        curve = criterion_curve(self.histogram_)
        if self.histogram_.n_occupied < 2:
            raise ValueError("histogram is degenerate: needs mass in at least 2 bins")
        self.threshold_ = int(np.argmax(curve))
        self.criterion_ = float(curve[self.threshold_])
        return self

    def transform(self, X) -> BinaryVolume:
        check_is_fitted(self, "threshold_")
        return binarize(X, self.threshold_)

    def fit_transform(self, X, y=None) -> BinaryVolume:
        return self.fit(X).transform(X)
