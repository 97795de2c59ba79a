"""Connected-component analysis of segmented volumes.

Material voxels are grouped into components under 6-, 18- or
26-connectivity. Labels are canonical: components are numbered 1..C by
decreasing size, ties broken by the first voxel in storage (z, y, x)
order, so identical inputs always yield identical labellings. The
largest component is the bulk; every other component is a levitating
stone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .validation import check_binary_volume, check_connectivity

_STRUCTURE_RANK = {6: 1, 18: 2, 26: 3}


@dataclass(frozen=True, eq=False)
class LabelField:
    """Canonical component labelling: 0 = pore, 1..C = components by size."""

    labels: np.ndarray
    n_components: int
    sizes: np.ndarray  # sizes[k] = voxel count of component k; sizes[0] = pore count
    connectivity: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape


@dataclass(frozen=True, eq=False)
class Component:
    label: int
    size: int
    voxels: np.ndarray  # (n, 3) coordinates in (z, y, x)
    bbox: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]  # inclusive per axis


@dataclass(frozen=True, eq=False)
class StoneReport:
    """Bulk plus the levitating stones of one labelling."""

    bulk: Component
    stones: tuple[Component, ...]
    one_voxel_count: int
    size_histogram: dict[int, int]

    @property
    def total_stones(self) -> int:
        return len(self.stones)


def connectivity_structure(connectivity: int) -> np.ndarray:
    return ndimage.generate_binary_structure(3, _STRUCTURE_RANK[check_connectivity(connectivity)])


def label_components(binary, connectivity: int = 26) -> LabelField:
    """Label maximal connected material components canonically."""
    b = check_binary_volume(binary)
    structure = connectivity_structure(connectivity)
    raw, n = ndimage.label(b.labels, structure=structure)
    if n == 0:
        return LabelField(raw.astype(np.int32), 0, np.array([b.labels.size]), int(connectivity))

    flat = raw.ravel()
    sizes = np.bincount(flat, minlength=n + 1)
    values, first = np.unique(flat, return_index=True)
    first_index = np.zeros(n + 1, dtype=np.int64)
    first_index[values] = first

    order = sorted(range(1, n + 1), key=lambda k: (-int(sizes[k]), int(first_index[k])))
    perm = np.zeros(n + 1, dtype=np.int32)
    for new_id, old_id in enumerate(order, start=1):
        perm[old_id] = new_id

    labels = perm[raw]
    new_sizes = np.zeros(n + 1, dtype=np.int64)
    new_sizes[0] = sizes[0]
    for new_id, old_id in enumerate(order, start=1):
        new_sizes[new_id] = sizes[old_id]
    return LabelField(labels.astype(np.int32), int(n), new_sizes, int(connectivity))


def extract_components(field: LabelField) -> list[Component]:
    """Materialize voxel sets and bounding boxes for every component."""
    out = []
    slices = ndimage.find_objects(field.labels)
    for k in range(1, field.n_components + 1):
        sl = slices[k - 1]
        block = field.labels[sl]
        local = np.argwhere(block == k)
        offset = np.array([s.start for s in sl], dtype=np.int64)
        voxels = local + offset
        bbox = tuple((int(s.start), int(s.stop) - 1) for s in sl)
        out.append(Component(label=k, size=int(field.sizes[k]), voxels=voxels, bbox=bbox))
    return out


def stone_counts(field: LabelField) -> tuple[int, int]:
    """(one-voxel stones, total stones) without materializing components."""
    if field.n_components == 0:
        raise ValueError("no material voxels: nothing to analyze")
    stone_sizes = field.sizes[2:]
    return int((stone_sizes == 1).sum()), int(stone_sizes.size)


def stone_report(field: LabelField) -> StoneReport:
    """Split components into the bulk (largest) and the levitating stones."""
    if field.n_components == 0:
        raise ValueError("no material voxels: nothing to analyze")
    comps = extract_components(field)
    bulk, stones = comps[0], tuple(comps[1:])
    hist: dict[int, int] = {}
    for s in stones:
        hist[s.size] = hist.get(s.size, 0) + 1
    one_voxel = sum(1 for s in stones if s.size == 1)
    return StoneReport(
        bulk=bulk,
        stones=stones,
        one_voxel_count=one_voxel,
        size_histogram=dict(sorted(hist.items())),
    )


def _mask_from_voxels(shape: tuple[int, int, int], voxels: np.ndarray) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(voxels.T)] = True
    return mask


def bulk_distance_map(shape: tuple[int, int, int], bulk: Component) -> np.ndarray:
    """Euclidean distance of every voxel to the nearest bulk voxel."""
    return ndimage.distance_transform_edt(~_mask_from_voxels(shape, bulk.voxels))


def distance_to_bulk(stone: Component, bulk: Component, shape=None) -> float:
    """Shortest center-to-center Euclidean distance from a stone to the bulk.

    Computed with a distance transform seeded by the bulk voxels; ``shape``
    defaults to the tight box around both components.
    """
    if stone.voxels.size == 0 or bulk.voxels.size == 0:
        raise ValueError("distance requires non-empty components")
    if shape is None:
        hi = np.maximum(stone.voxels.max(axis=0), bulk.voxels.max(axis=0)) + 1
        shape = tuple(int(v) for v in hi)
    dist = bulk_distance_map(shape, bulk)
    return float(dist[tuple(stone.voxels.T)].min())


def stone_distances(field: LabelField, report: StoneReport) -> np.ndarray:
    """Distance to the bulk for every stone in report order (one shared EDT)."""
    if not report.stones:
        return np.zeros(0)
    dist = bulk_distance_map(field.shape, report.bulk)
    idx = [s.label for s in report.stones]
    return np.asarray(
        ndimage.minimum(dist, labels=field.labels, index=idx), dtype=np.float64
    )


def write_stone_report_csv(
    report: StoneReport, distances: np.ndarray, path: str | Path
) -> None:
    """Per-stone rows (id, size, d, d_hat) preceded by '#' summary lines."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# bulk_id={report.bulk.label}\n")
        fh.write(f"# bulk_size={report.bulk.size}\n")
        fh.write(f"# total_stones={report.total_stones}\n")
        fh.write(f"# one_voxel_stones={report.one_voxel_count}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "size", "d", "d_hat"])
        for stone, d in zip(report.stones, distances):
            d_hat = d / stone.size ** (1.0 / 3.0)
            writer.writerow([stone.label, stone.size, f"{d:.6g}", f"{d_hat:.6g}"])


def write_size_histogram_csv(report: StoneReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["size", "count"])
        for size, count in report.size_histogram.items():
            writer.writerow([size, count])
