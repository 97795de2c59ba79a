"""Synthetic porous phantoms with ground truth, plus noise injection.

The generator stamps overlapping spherical grains until the measured
porosity lands within two percentage points of the target. Every grain
after the first is centered on an existing material voxel, so the grain
union is one connected bulk by construction; grain radii shrink near the
target so a single stamp can never overshoot the tolerance window. The
clean volume has exactly two intensity levels and the ground truth is
its material mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_volume
from .volume import BinaryVolume, Volume

POROSITY_TOLERANCE = 0.02
_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for a two-level porous volume.

    dims is (nx, ny, nz); porosity is the pore fraction of the ground
    truth; radii are in voxels.
    """

    dims: tuple[int, int, int] = (64, 64, 64)
    target_porosity: float = 0.5
    grain_radius_range: tuple[float, float] = (14.0, 20.0)
    material_intensity: float = 200.0
    pore_intensity: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError(f"dims must be three positive counts, got {self.dims!r}")
        if not 0.0 < self.target_porosity < 1.0:
            raise ValueError(f"target porosity must lie in (0, 1), got {self.target_porosity!r}")
        lo, hi = self.grain_radius_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad grain radius range {self.grain_radius_range!r}")
        for name, value in (
            ("material_intensity", self.material_intensity),
            ("pore_intensity", self.pore_intensity),
        ):
            if not 0.0 <= value <= 255.0:
                raise ValueError(f"{name} must lie in [0, 255], got {value!r}")
        if self.material_intensity == self.pore_intensity:
            raise ValueError("material and pore intensities must differ")


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class SaltPepperNoise:
    p: float
    salt_value: float = 255.0
    pepper_value: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"flip probability must lie in [0, 1], got {self.p!r}")


def porosity(binary: BinaryVolume) -> float:
    """Pore fraction of a segmented volume."""
    return 1.0 - binary.material_count / binary.labels.size


def _sphere_patch(
    shape: tuple[int, int, int], center: tuple[int, int, int], radius: float
) -> tuple[tuple[slice, slice, slice], np.ndarray]:
    nz, ny, nx = shape
    cz, cy, cx = center
    r = int(np.ceil(radius))
    box = (
        slice(max(0, cz - r), min(nz, cz + r + 1)),
        slice(max(0, cy - r), min(ny, cy + r + 1)),
        slice(max(0, cx - r), min(nx, cx + r + 1)),
    )
    z, y, x = np.ogrid[box[0], box[1], box[2]]
    ball = (z - cz) ** 2 + (y - cy) ** 2 + (x - cx) ** 2 <= radius * radius
    return box, ball


def generate_phantom(spec: PhantomSpec) -> tuple[Volume, BinaryVolume]:
    """Build a clean two-level volume and its ground-truth segmentation.

    Deterministic in the seed. Raises if the porosity target cannot be
    reached within a bounded number of grain placements (e.g. the volume
    is too small for the tolerance window).
    """
    rng = np.random.default_rng(spec.seed)
    nx, ny, nz = spec.dims
    shape = (nz, ny, nx)
    total = nx * ny * nz
    material = np.zeros(shape, dtype=bool)
    target = spec.target_porosity
    r_lo, r_hi = spec.grain_radius_range

    attempts = 0
    while True:
        pore_fraction = 1.0 - material.sum() / total
        if pore_fraction <= target + POROSITY_TOLERANCE:
            break
        attempts += 1
        if attempts > _MAX_ATTEMPTS:
            raise ValueError(
                f"porosity target {target} not reached after {_MAX_ATTEMPTS} attempts "
                f"(currently {pore_fraction:.4f})"
            )
        # shrink the radius as the target nears so a grain rarely overshoots
        margin = (pore_fraction - (target - POROSITY_TOLERANCE)) * total
        r_cap = (3.0 * margin / (4.0 * np.pi)) ** (1.0 / 3.0)
        radius = max(min(rng.uniform(r_lo, r_hi), r_cap), 1.0)
        if not material.any():
            center = (nz // 2, ny // 2, nx // 2)
        else:
            seeds = np.flatnonzero(material)
            flat = seeds[rng.integers(0, seeds.size)]
            center = np.unravel_index(flat, shape)
        box, ball = _sphere_patch(shape, center, radius)
        added = int((ball & ~material[box]).sum())
        if pore_fraction - added / total < target - POROSITY_TOLERANCE:
            continue  # grain would overshoot the tolerance window; try another
        material[box] |= ball

    data = np.where(material, spec.material_intensity, spec.pore_intensity)
    return Volume(data), BinaryVolume(material)


def add_noise(volume, noise) -> Volume:
    """Apply a noise model; output is clamped to the volume's intensity range."""
    vol = check_volume(volume)
    lo, hi = vol.intensity_range
    if isinstance(noise, GaussianNoise):
        rng = np.random.default_rng(noise.seed)
        data = vol.data + rng.normal(0.0, noise.sigma, vol.shape)
    elif isinstance(noise, SaltPepperNoise):
        rng = np.random.default_rng(noise.seed)
        u = rng.random(vol.shape)
        data = vol.data.copy()
        data[u < noise.p / 2.0] = noise.salt_value
        data[(u >= noise.p / 2.0) & (u < noise.p)] = noise.pepper_value
    else:
        raise TypeError(f"unsupported noise spec {type(noise).__name__}")
    return Volume(np.clip(data, lo, hi), intensity_range=vol.intensity_range)
