"""Distortion-constrained selection of filter parameters.

A candidate filter is scored by running the segmentation pipeline on the
filtered volume (threshold recomputed per candidate) and counting
one-voxel stones; the constraint is the distortion

    delta = sqrt(sum((original - filtered)^2)) / V

with V the total voxel count (square root of the summed squares, divided
by V -- not an RMS). The acceptable distortion bound defaults to the
distortion a reference 3x3 median filter induces on the same volume.
The search minimizes one-voxel stones over the feasible set, breaking
ties by smaller delta, then fewer total stones, then grid order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.model_selection import ParameterGrid
from sklearn.utils.validation import check_is_fitted

from .components import label_components, stone_counts
from .filters import (
    FAMILY_ORDER,
    FILTER_FAMILIES,
    MedianFilter,
    SliceFilter,
    _resolve_key,
    params_string,
)
from .segmentation import intensity_histogram, binarize, unbalanced_otsu_threshold
from .validation import check_connectivity, check_volume
from .volume import Volume


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Pipeline metrics for one filter configuration."""

    spec: SliceFilter
    delta: float
    one_voxel_stones: int
    total_stones: int
    threshold: int

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def params(self) -> str:
        return params_string(self.spec)


@dataclass(eq=False)
class SelectionResult:
    evaluations: list[Evaluation]
    best_per_family: dict[str, Evaluation | None]
    best_overall: Evaluation | None
    delta_max: float

    @property
    def feasible_found(self) -> bool:
        return self.best_overall is not None


def distortion(original, filtered) -> float:
    """Scaled Euclidean distance between two equally sized volumes."""
    a = check_volume(original)
    b = check_volume(filtered)
    if a.shape != b.shape:
        raise ValueError(f"volume shapes differ: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    return float(np.sqrt(np.sum(diff * diff)) / a.n_voxels)


def calibrate_delta_max(volume, h: int = 3, w: int = 3) -> float:
    """Distortion induced by the reference median filter (3x3 by default)."""
    vol = check_volume(volume)
    return distortion(vol, MedianFilter(h=h, w=w).transform(vol))


def evaluate_filter(volume, filt: SliceFilter, connectivity: int = 26) -> Evaluation:
    """Filter, re-threshold, segment and count stones for one configuration."""
    vol = check_volume(volume)
    check_connectivity(connectivity)
    filtered = filt.transform(vol)
    threshold = unbalanced_otsu_threshold(intensity_histogram(filtered))
    field = label_components(binarize(filtered, threshold), connectivity=connectivity)
    one_voxel, total = stone_counts(field)
    return Evaluation(
        spec=filt,
        delta=distortion(vol, filtered),
        one_voxel_stones=one_voxel,
        total_stones=total,
        threshold=threshold,
    )


def default_grids() -> dict[str, dict[str, list]]:
    """Per-family parameter grids bracketing the useful operating ranges."""
    return {
        "median": {"h": [1, 3, 5], "w": [1, 3, 5]},
        "aniso": {
            "N": list(range(1, 17)),
            "lambda": [0.05, 0.1, 0.15, 0.2, 0.25],
            "K": [float(k) for k in range(5, 55, 5)],
        },
        "bilateral": {
            "h": [1, 3],
            "w": [3, 5, 7, 9],
            "sigma_s": [0.5, 0.9, 1.3, 1.7, 2.1, 2.5],
            "sigma_r": [round(0.1 * i, 1) for i in range(1, 11)],
        },
        "guided": {
            "w": [3, 5, 7],
            "eps": [round(0.025 * i, 3) for i in range(1, 21)],
        },
    }


def build_grid_filters(grids: dict[str, dict[str, list]]) -> list[SliceFilter]:
    """Expand grid definitions into concrete filter instances, in deterministic order."""
    filters: list[SliceFilter] = []
    unknown = set(grids) - set(FILTER_FAMILIES)
    if unknown:
        raise ValueError(f"unknown filter families in grid: {sorted(unknown)}")
    for family in FAMILY_ORDER:
        if family not in grids:
            continue
        mapped: dict[str, list] = {}
        for key, values in grids[family].items():
            attr, typ = _resolve_key(family, key)
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise ValueError(f"grid values for {family}:{key} must be a non-empty list")
            mapped[attr] = [typ(v) for v in values]
        for params in ParameterGrid(mapped):
            filt = FILTER_FAMILIES[family](**params)
            filt._check_params()
            filters.append(filt)
    return filters


def _evaluate_many(
    vol: Volume, filters: list[SliceFilter], connectivity: int, threads: int
) -> list[Evaluation]:
    if threads <= 1:
        return [evaluate_filter(vol, f, connectivity) for f in filters]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda f: evaluate_filter(vol, f, connectivity), filters))


def _argbest(evaluations: list[Evaluation], indices: list[int]) -> Evaluation | None:
    best = None
    for i in indices:
        ev = evaluations[i]
        key = (ev.one_voxel_stones, ev.delta, ev.total_stones, i)
        if best is None or key < best[0]:
            best = (key, ev)
    return None if best is None else best[1]


def grid_search(
    volume,
    grids: dict[str, dict[str, list]] | None = None,
    delta_max: float | str = "calibrate",
    connectivity: int = 26,
    threads: int = 1,
) -> SelectionResult:
    """Evaluate every grid point and pick the feasible stone-count minimizers.

    Args:
        volume: input volume (the distortion baseline).
        grids: mapping family -> {param: values}; defaults to default_grids().
        delta_max: explicit distortion bound, or "calibrate" to derive it
            from the reference 3x3 median filter.
        connectivity: voxel connectivity for stone counting.
        threads: worker threads across grid points (results are identical
            for any thread count).

    Returns:
        SelectionResult with all evaluations and per-family/overall winners;
        winners are None when a scope has no feasible point.
    """
    vol = check_volume(volume)
    grids = default_grids() if grids is None else grids
    filters = build_grid_filters(grids)
    if not filters:
        raise ValueError("empty parameter grid")
    if isinstance(delta_max, str):
        if delta_max != "calibrate":
            raise ValueError(f"delta_max must be a number or 'calibrate', got {delta_max!r}")
        bound = calibrate_delta_max(vol)
    else:
        bound = float(delta_max)

    evaluations = _evaluate_many(vol, filters, check_connectivity(connectivity), int(threads))
    feasible = [i for i, ev in enumerate(evaluations) if ev.delta <= bound]
    feasible_set = set(feasible)
    by_family: dict[str, list[int]] = {}
    for i, ev in enumerate(evaluations):
        by_family.setdefault(ev.family, []).append(i)

    best_per_family = {
        family: _argbest(evaluations, [i for i in indices if i in feasible_set])
        for family, indices in by_family.items()
    }
    return SelectionResult(
        evaluations=evaluations,
        best_per_family=best_per_family,
        best_overall=_argbest(evaluations, feasible),
        delta_max=bound,
    )


class FilterGridSearch(BaseEstimator):
    """Grid-search estimator over filter families under a distortion bound.

    After fit: ``evaluations_``, ``best_per_family_``, ``best_evaluation_``,
    ``best_estimator_`` (the winning filter) and ``delta_max_``. transform
    applies the winning filter.
    """

    def __init__(
        self,
        grids: dict[str, dict[str, list]] | None = None,
        delta_max: float | str = "calibrate",
        connectivity: int = 26,
        threads: int = 1,
    ):
        self.grids = grids
        self.delta_max = delta_max
        self.connectivity = connectivity
        self.threads = threads

    def fit(self, X, y=None):
        result = grid_search(
            X,
            grids=self.grids,
            delta_max=self.delta_max,
            connectivity=self.connectivity,
            threads=self.threads,
        )
        self.result_ = result
        self.evaluations_ = result.evaluations
        self.best_per_family_ = result.best_per_family
        self.best_evaluation_ = result.best_overall
        self.best_estimator_ = None if result.best_overall is None else result.best_overall.spec
        self.delta_max_ = result.delta_max
        return self

    def transform(self, X) -> Volume:
        check_is_fitted(self, "result_")
        if self.best_estimator_ is None:
            raise RuntimeError("no feasible configuration found; cannot transform")
        return self.best_estimator_.transform(X)


@dataclass(frozen=True, eq=False)
class SweepTable:
    """Rows behind a two-parameter sweep figure."""

    family: str
    param_names: tuple[str, str]
    rows: list[tuple[float, float, float, int, int]]  # (p1, p2, delta, one-voxel, total)


def param_sweep(
    volume,
    family: str,
    varying: dict[str, list],
    fixed: dict[str, float] | None = None,
    connectivity: int = 26,
    threads: int = 1,
) -> SweepTable:
    """Evaluate a grid varying exactly two parameters of one family.

    ``varying`` maps two spec-string parameter names to value lists; the
    remaining parameters come from ``fixed`` or the family defaults. Rows
    are emitted in row-major order over (first param, second param).
    """
    vol = check_volume(volume)
    if family not in FILTER_FAMILIES:
        raise ValueError(f"unknown filter family {family!r}")
    if len(varying) != 2:
        raise ValueError(f"sweep requires exactly 2 varying parameters, got {len(varying)}")
    fixed = fixed or {}

    names = list(varying)
    base_kwargs = {}
    for key, value in fixed.items():
        attr, typ = _resolve_key(family, key)
        base_kwargs[attr] = typ(value)

    filters = []
    pairs = []
    for v1 in varying[names[0]]:
        for v2 in varying[names[1]]:
            kwargs = dict(base_kwargs)
            for key, value in ((names[0], v1), (names[1], v2)):
                attr, typ = _resolve_key(family, key)
                kwargs[attr] = typ(value)
            filt = FILTER_FAMILIES[family](**kwargs)
            filt._check_params()
            filters.append(filt)
            pairs.append((v1, v2))

    evaluations = _evaluate_many(vol, filters, check_connectivity(connectivity), int(threads))
    rows = [
        (float(p1), float(p2), ev.delta, ev.one_voxel_stones, ev.total_stones)
        for (p1, p2), ev in zip(pairs, evaluations)
    ]
    return SweepTable(family=family, param_names=(names[0], names[1]), rows=rows)


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def write_selection_csv(
    result: SelectionResult,
    path: str | Path,
    baseline: Evaluation | None = None,
    all_evaluations: bool = False,
) -> None:
    """Summary CSV: per-family winners (or every grid point) plus optional baseline row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["family", "params", "one_voxel_stones", "total_stones", "delta", "feasible"]
        )
        if baseline is not None:
            writer.writerow(
                [
                    "none",
                    "",
                    baseline.one_voxel_stones,
                    baseline.total_stones,
                    _fmt(baseline.delta),
                    str(baseline.delta <= result.delta_max).lower(),
                ]
            )
        if all_evaluations:
            for ev in result.evaluations:
                writer.writerow(
                    [
                        ev.family,
                        ev.params,
                        ev.one_voxel_stones,
                        ev.total_stones,
                        _fmt(ev.delta),
                        str(ev.delta <= result.delta_max).lower(),
                    ]
                )
        else:
            for family, ev in result.best_per_family.items():
                if ev is None:
                    writer.writerow([family, "", "", "", "", "false"])
                else:
                    writer.writerow(
                        [ev.family, ev.params, ev.one_voxel_stones, ev.total_stones,
                         _fmt(ev.delta), "true"]
                    )


def write_sweep_csv(table: SweepTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [table.param_names[0], table.param_names[1], "delta", "one_voxel_stones", "total_stones"]
        )
        for p1, p2, delta, one_voxel, total in table.rows:
            writer.writerow([_fmt(p1), _fmt(p2), _fmt(delta), one_voxel, total])
