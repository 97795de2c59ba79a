"""Edge-preserving denoising filters applied slice-wise to volumes.

Four filter families are provided as sklearn-style transformers: median,
anisotropic diffusion (Perona-Malik), bilateral and guided. A volume is
treated as an independent stack of z-slices (2D windows, no coupling along
z) and every filter uses replicate (clamp-to-edge) padding. Range-domain
parameters of the bilateral and guided filters (``sigma_range``,
``epsilon``) are interpreted on a normalized [0, 1] intensity scale by
default; construct with ``unit_range=False`` to use raw 0-255 units.

Filters serialize to and from a compact spec-string grammar used by the
CLI and grid files, e.g. ``median:h=1,w=3`` or
``aniso:N=8,lambda=0.2,K=20``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import (
    check_nonneg_int,
    check_odd,
    check_positive,
    check_slice,
    check_unit_interval,
    check_volume,
)
from .volume import Volume

MAX_DIFFUSION_RATE = 0.25  # explicit-scheme stability bound for 4-neighbour updates


def _pad_yx(a: np.ndarray, ry: int, rx: int) -> np.ndarray:
    pad = [(0, 0)] * (a.ndim - 2) + [(ry, ry), (rx, rx)]
    return np.pad(a, pad, mode="edge")


def _window(a: np.ndarray, h: int, w: int) -> tuple[int, ...]:
    return (1,) * (a.ndim - 2) + (h, w)


def diffusion_coefficient(gradient, kappa: float):
    """Edge-stopping function 1 / (1 + (g / kappa)^2)."""
    g = np.asarray(gradient, dtype=np.float64)
    return 1.0 / (1.0 + (g / kappa) ** 2)


class SliceFilter(BaseEstimator, TransformerMixin):
    """Base class: a parameterized 2D filter applied per z-slice."""

    family = ""

    def fit(self, X, y=None):
        self._check_params()
        return self

    def transform(self, X) -> Volume:
        """Filter every z-slice independently; output clamped to the intensity range."""
        self._check_params()
        vol = check_volume(X)
        out = self._apply(vol.data)
        lo, hi = vol.intensity_range
        return Volume(np.clip(out, lo, hi), intensity_range=vol.intensity_range)

    def filter_slice(self, plane: np.ndarray) -> np.ndarray:
        """Filter a single 2D slice (unclamped)."""
        self._check_params()
        return self._apply(check_slice(plane))

    def _apply(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_params(self) -> None:
        raise NotImplementedError


class MedianFilter(SliceFilter):
    """Window median with an h x w window (both odd)."""

    family = "median"

    def __init__(self, h: int = 3, w: int = 3):
        self.h = h
        self.w = w

    def _check_params(self):
        check_odd("h", self.h)
        check_odd("w", self.w)

    def _apply(self, a):
        return ndimage.median_filter(
            np.asarray(a, dtype=np.float64),
            size=_window(a, self.h, self.w),
            mode="nearest",
        )


class AnisotropicDiffusionFilter(SliceFilter):
    """Iterative Perona-Malik diffusion over the four in-plane neighbours.

    Each step adds ``gamma`` times the sum of edge-weighted one-sided
    differences toward N/S/E/W; ``kappa`` sets the gradient magnitude at
    which diffusion halves. ``gamma`` is capped at 0.25 for stability.
    """

    family = "aniso"

    def __init__(self, iterations: int = 8, gamma: float = 0.2, kappa: float = 20.0):
        self.iterations = iterations
        self.gamma = gamma
        self.kappa = kappa

    def _check_params(self):
        check_nonneg_int("iterations", self.iterations)
        check_unit_interval("gamma", self.gamma, upper=MAX_DIFFUSION_RATE)
        check_positive("kappa", self.kappa)

    def _apply(self, a):
        out = np.asarray(a, dtype=np.float64).copy()
        kappa = float(self.kappa)
        gamma = float(self.gamma)
        h, w = out.shape[-2:]
        for _ in range(int(self.iterations)):
            p = _pad_yx(out, 1, 1)
            flux = np.zeros_like(out)
            for grad in (
                p[..., 0:h, 1 : w + 1] - out,  # north
                p[..., 2 : h + 2, 1 : w + 1] - out,  # south
                p[..., 1 : h + 1, 2 : w + 2] - out,  # east
                p[..., 1 : h + 1, 0:w] - out,  # west
            ):
                flux += diffusion_coefficient(grad, kappa) * grad
            out = out + gamma * flux
        return out


class BilateralFilter(SliceFilter):
    """Gaussian spatial x Gaussian range weighting over an h x w window.

    Weights follow exp(-d^2 / sigma^2) in both domains (no factor 2) and
    are normalized to sum to 1 at every pixel. With ``unit_range`` the
    range kernel sees intensities divided by 255.
    """

    family = "bilateral"

    def __init__(
        self,
        h: int = 1,
        w: int = 7,
        sigma_space: float = 1.3,
        sigma_range: float = 0.5,
        unit_range: bool = True,
    ):
        self.h = h
        self.w = w
        self.sigma_space = sigma_space
        self.sigma_range = sigma_range
        self.unit_range = unit_range

    def _check_params(self):
        check_odd("h", self.h)
        check_odd("w", self.w)
        check_positive("sigma_space", self.sigma_space)
        check_positive("sigma_range", self.sigma_range)

    def _apply(self, a, values=None):
        a = np.asarray(a, dtype=np.float64)
        signal = a if values is None else np.asarray(values, dtype=np.float64)
        if signal.shape != a.shape:
            raise ValueError("values must match the slice shape")
        ry, rx = (self.h - 1) // 2, (self.w - 1) // 2
        scale = 255.0 if self.unit_range else 1.0
        ref = a / scale
        pv = _pad_yx(signal, ry, rx)
        pr = _pad_yx(ref, ry, rx)
        ss2 = float(self.sigma_space) ** 2
        sr2 = float(self.sigma_range) ** 2
        h, w = a.shape[-2:]
        num = np.zeros_like(signal)
        den = np.zeros_like(signal)
        for dy in range(-ry, ry + 1):
            for dx in range(-rx, rx + 1):
                nb = pv[..., ry + dy : ry + dy + h, rx + dx : rx + dx + w]
                nr = pr[..., ry + dy : ry + dy + h, rx + dx : rx + dx + w]
                wgt = np.exp(-(dy * dy + dx * dx) / ss2) * np.exp(-((ref - nr) ** 2) / sr2)
                num += wgt * nb
                den += wgt
        return num / den

    def filter_slice(self, plane, values=None):
        """Filter a slice; if ``values`` is given, average those under weights from ``plane``."""
        self._check_params()
        plane = check_slice(plane)
        return self._apply(plane, values=values)


class GuidedFilter(SliceFilter):
    """Self-guided filter over a square w x w window with regularizer epsilon.

    Implemented with the O(n) mean/variance box aggregation; with
    ``unit_range`` the variance and epsilon live on the [0, 1] scale.
    """

    family = "guided"

    def __init__(self, w: int = 3, epsilon: float = 0.275, unit_range: bool = True):
        self.w = w
        self.epsilon = epsilon
        self.unit_range = unit_range

    def _check_params(self):
        check_odd("w", self.w)
        check_positive("epsilon", self.epsilon)

    def _apply(self, a):
        a = np.asarray(a, dtype=np.float64)
        scale = 255.0 if self.unit_range else 1.0
        g = a / scale
        size = _window(a, self.w, self.w)
        mean = ndimage.uniform_filter(g, size=size, mode="nearest")
        mean_sq = ndimage.uniform_filter(g * g, size=size, mode="nearest")
        var = mean_sq - mean * mean
        gain = var / (var + float(self.epsilon))
        bias = mean - gain * mean
        out = (
            ndimage.uniform_filter(gain, size=size, mode="nearest") * g
            + ndimage.uniform_filter(bias, size=size, mode="nearest")
        )
        return out * scale


FILTER_FAMILIES: dict[str, type[SliceFilter]] = {
    "median": MedianFilter,
    "aniso": AnisotropicDiffusionFilter,
    "bilateral": BilateralFilter,
    "guided": GuidedFilter,
}

FAMILY_ORDER = ("median", "aniso", "bilateral", "guided")

# spec-string key -> (constructor argument, value parser), in canonical order
_PARAM_KEYS: dict[str, tuple[tuple[str, str, type], ...]] = {
    "median": (("h", "h", int), ("w", "w", int)),
    "aniso": (("N", "iterations", int), ("lambda", "gamma", float), ("K", "kappa", float)),
    "bilateral": (
        ("h", "h", int),
        ("w", "w", int),
        ("sigma_s", "sigma_space", float),
        ("sigma_r", "sigma_range", float),
    ),
    "guided": (("w", "w", int), ("eps", "epsilon", float)),
}

# accepted spellings for spec-string keys
_KEY_SYNONYMS = {
    "sigma_space": "sigma_s",
    "sigma_color": "sigma_r",
    "epsilon": "eps",
    "gamma": "lambda",
    "iterations": "N",
    "kappa": "K",
}


def _resolve_key(family: str, key: str) -> tuple[str, type]:
    canonical = _KEY_SYNONYMS.get(key, key)
    for alias, attr, typ in _PARAM_KEYS[family]:
        if alias == canonical:
            return attr, typ
    raise ValueError(f"unknown parameter {key!r} for filter family {family!r}")


def filter_from_string(spec: str) -> SliceFilter:
    """Parse a filter spec-string such as ``bilateral:h=1,w=7,sigma_s=1.3,sigma_r=0.5``."""
    spec = spec.strip()
    family, _, rest = spec.partition(":")
    family = family.strip()
    if family not in FILTER_FAMILIES:
        raise ValueError(
            f"unknown filter family {family!r}; expected one of {', '.join(FAMILY_ORDER)}"
        )
    kwargs = {}
    if rest.strip():
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed parameter {item!r} in filter spec {spec!r}")
            attr, typ = _resolve_key(family, key.strip())
            try:
                kwargs[attr] = typ(value.strip())
            except ValueError as exc:
                raise ValueError(f"bad value for {key.strip()!r} in {spec!r}: {exc}") from None
    filt = FILTER_FAMILIES[family](**kwargs)
    filt._check_params()
    return filt


def filter_to_string(filt: SliceFilter) -> str:
    """Serialize a filter to the canonical spec-string form."""
    params = filt.get_params()
    parts = []
    for alias, attr, typ in _PARAM_KEYS[filt.family]:
        value = params[attr]
        parts.append(f"{alias}={format(value, 'g') if typ is float else int(value)}")
    return f"{filt.family}:" + ",".join(parts)


def params_string(filt: SliceFilter) -> str:
    """The parameter portion of the spec-string, e.g. ``h=1,w=3``."""
    return filter_to_string(filt).partition(":")[2]


def apply_filter(volume, filt: SliceFilter, threads: int = 1) -> Volume:
    """Apply a slice filter to a volume, optionally across a thread pool.

    Slices are independent, so splitting the z-axis into chunks gives
    bit-identical output for any thread count.
    """
    vol = check_volume(volume)
    filt._check_params()
    threads = max(1, int(threads))
    nz = vol.shape[0]
    if threads == 1 or nz == 1:
        return filt.transform(vol)
    n_chunks = min(threads * 4, nz)
    bounds = np.linspace(0, nz, n_chunks + 1, dtype=int)
    chunks = [vol.data[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(filt._apply, chunks))
    out = np.concatenate(parts, axis=0)
    lo, hi = vol.intensity_range
    return Volume(np.clip(out, lo, hi), intensity_range=vol.intensity_range)
