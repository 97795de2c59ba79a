"""Volumetric data model and raw-file I/O.

Volumes are dense 3D scalar fields stored z-major with x fastest, i.e.
``data[z, y, x]``. On disk a volume is a headerless little-endian unsigned
8-bit payload in the same order, accompanied by a JSON sidecar at
``<path>.json`` with the fields ``dims`` (``[nx, ny, nz]``), ``dtype``
(``"u8"``) and ``intensity_range``. Intensities are widened to float64 on
load and rounded half-away-from-zero back to 8 bits on save, so
save/load round-trips are bit exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_INTENSITY_RANGE = (0.0, 255.0)


@dataclass(frozen=True, eq=False)
class Volume:
    """3D scalar field of voxel intensities.

    The data buffer is coerced to contiguous float64 and frozen after
    construction; operations return new volumes instead of mutating.
    """

    data: np.ndarray
    intensity_range: tuple[float, float] = DEFAULT_INTENSITY_RANGE

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"volume data must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"volume dims must all be >= 1, got shape {arr.shape}")
        lo, hi = (float(x) for x in self.intensity_range)
        if not lo < hi:
            raise ValueError(f"invalid intensity range [{lo}, {hi}]")
        amin, amax = float(arr.min()), float(arr.max())
        if amin < lo or amax > hi:
            raise ValueError(
                f"intensities [{amin}, {amax}] fall outside range [{lo}, {hi}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "intensity_range", (lo, hi))

    @property
    def dims(self) -> tuple[int, int, int]:
        """Voxel counts as (nx, ny, nz)."""
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape (nz, ny, nx)."""
        return self.data.shape

    @property
    def n_voxels(self) -> int:
        return self.data.size

    def __repr__(self):
        lo, hi = self.intensity_range
        return f"Volume(dims={self.dims}, intensity_range=({lo:g}, {hi:g}))"


@dataclass(frozen=True, eq=False)
class BinaryVolume:
    """Pore/material labelling of a volume: 0 = pore, 1 = material."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 3:
            raise ValueError(f"label data must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"label dims must all be >= 1, got shape {arr.shape}")
        if arr.dtype != bool:
            amin, amax = arr.min(), arr.max()
            if amin < 0 or amax > 1 or not np.array_equal(arr, arr.astype(np.uint8)):
                raise ValueError("labels must contain only 0 and 1")
        out = np.ascontiguousarray(arr, dtype=np.uint8)
        out.setflags(write=False)
        object.__setattr__(self, "labels", out)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.labels.shape
        return (nx, ny, nz)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    @property
    def material_count(self) -> int:
        return int(self.labels.sum())

    def __repr__(self):
        return f"BinaryVolume(dims={self.dims}, material={self.material_count})"


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def _read_sidecar(path: str | Path) -> dict:
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise FileNotFoundError(f"missing sidecar descriptor {meta_path}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    dims = meta.get("dims")
    if not (isinstance(dims, list) and len(dims) == 3):
        raise ValueError(f"sidecar {meta_path} must define dims=[nx, ny, nz]")
    dtype = meta.get("dtype", "u8")
    if dtype != "u8":
        raise ValueError(f"unsupported dtype {dtype!r} in {meta_path} (only u8)")
    return meta


def _write_sidecar(path: str | Path, dims: tuple[int, int, int], rng: tuple[float, float]) -> None:
    meta = {
        "dims": [int(d) for d in dims],
        "dtype": "u8",
        "intensity_range": [float(rng[0]), float(rng[1])],
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")


def _read_payload(path: str | Path, dims: tuple[int, int, int]) -> np.ndarray:
    nx, ny, nz = (int(d) for d in dims)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != nx * ny * nz:
        raise ValueError(
            f"payload of {path} has {raw.size} voxels, sidecar dims "
            f"({nx}, {ny}, {nz}) require {nx * ny * nz}"
        )
    return raw.reshape(nz, ny, nx)


def load_volume(path: str | Path) -> Volume:
    """Load a raw 8-bit volume plus sidecar descriptor from disk."""
    meta = _read_sidecar(path)
    raw = _read_payload(path, meta["dims"])
    rng = tuple(meta.get("intensity_range", DEFAULT_INTENSITY_RANGE))
    return Volume(raw.astype(np.float64), intensity_range=rng)


def save_volume(volume: Volume, path: str | Path) -> None:
    """Write a volume as a raw u8 payload plus sidecar, inverting load_volume."""
    lo, hi = volume.intensity_range
    if lo < 0.0 or hi > 255.0:
        raise ValueError(f"intensity range [{lo}, {hi}] does not fit the u8 file format")
    # round half away from zero; quantization happens only at the file boundary
    payload = np.floor(volume.data + 0.5).astype(np.uint8)
    payload.tofile(path)
    _write_sidecar(path, volume.dims, volume.intensity_range)


def load_binary_volume(path: str | Path) -> BinaryVolume:
    """Load a {0, 1} labelling stored in the raw u8 container."""
    meta = _read_sidecar(path)
    raw = _read_payload(path, meta["dims"])
    return BinaryVolume(raw)


def save_binary_volume(binary: BinaryVolume, path: str | Path) -> None:
    binary.labels.tofile(path)
    _write_sidecar(path, binary.dims, (0.0, 1.0))


def extract_slice(volume: Volume, z: int) -> np.ndarray:
    """Return the z-th plane as a writable (ny, nx) float array."""
    nz = volume.shape[0]
    if not 0 <= z < nz:
        raise IndexError(f"slice index {z} out of range for {nz} slices")
    return volume.data[z].copy()

def insert_slice(volume: Volume, z: int, plane: np.ndarray) -> Volume:
    """Return a new volume with the z-th plane replaced."""
    nz, ny, nx = volume.shape
    if not 0 <= z < nz:
        raise IndexError(f"slice index {z} out of range for {nz} slices")
    plane = np.asarray(plane, dtype=np.float64)
    if plane.shape != (ny, nx):
        raise ValueError(f"slice shape {plane.shape} does not match plane shape {(ny, nx)}")
    data = volume.data.copy()
    data[z] = plane
    return Volume(data, intensity_range=volume.intensity_range)
