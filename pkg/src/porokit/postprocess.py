"""Resolution of residual stones: remove far ones, attach near ones.

A stone with shortest bulk distance d and size V gets the relative
distance d / cbrt(V). Above the threshold tau the stone is deleted
(voxels become pore); at or below tau it is kept as material. Attachment
is logical only -- no bridging voxels are synthesized, so porosity
statistics stay honest. Bulk and pore voxels are never touched.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .components import StoneReport, stone_distances, LabelField
from .validation import check_binary_volume
from .volume import BinaryVolume

REMOVE = "remove"
ATTACH = "attach"


@dataclass(frozen=True)
class StoneDecision:
    stone_id: int
    size: int
    distance: float
    metric: float
    action: str


def stone_metric(distance: float, size: int) -> float:
    """Relative distance d / cbrt(V) of a stone to the bulk."""
    d = float(distance)
    v = int(size)
    if d <= 0.0:
        raise ValueError(f"distance must be positive, got {distance!r}")
    if v < 1 or v != size:
        raise ValueError(f"stone size must be an integer >= 1, got {size!r}")
    return d / v ** (1.0 / 3.0)


def resolve_stones(
    binary, field: LabelField, report: StoneReport, tau: float = 1.0
) -> tuple[BinaryVolume, list[StoneDecision]]:
    """Remove or keep each stone by its relative distance to the bulk.

    Returns the rewritten volume and one decision per stone (in report
    order). Raises if tau is not positive or the report does not match
    the volume.
    """
    b = check_binary_volume(binary)
    tau = float(tau)
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    accounted = report.bulk.size + sum(s.size for s in report.stones)
    if accounted != b.material_count or field.shape != b.shape:
        raise ValueError("stone report does not match the volume")

    distances = stone_distances(field, report)
    out = b.labels.copy()
    decisions = []
    for stone, d in zip(report.stones, distances):
        metric = stone_metric(d, stone.size)
        action = REMOVE if metric > tau else ATTACH
        if action == REMOVE:
            out[tuple(stone.voxels.T)] = 0
        decisions.append(
            StoneDecision(
                stone_id=stone.label,
                size=stone.size,
                distance=float(d),
                metric=metric,
                action=action,
            )
        )
    return BinaryVolume(out), decisions


def write_decisions_csv(decisions: list[StoneDecision], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stone_id", "size", "d", "d_hat", "action"])
        for dec in decisions:
            writer.writerow(
                [dec.stone_id, dec.size, f"{dec.distance:.6g}", f"{dec.metric:.6g}", dec.action]
            )
