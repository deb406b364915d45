"""Controller availability under periodic restarts.

Per cycle the main controller runs for the restart window delta_r out of
delta_r + t_s + t_r total (window + secure interval + reboot).  The map-wide
figure weights each safe cell's availability by how commonly the plant
operates in that part of the state space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .policy import RestartTimeMap

__all__ = ["Region", "cell_availability", "weighted_availability",
           "availability_breakdown"]


def cell_availability(delta_r: float, t_s: float, t_r: float) -> float:
    """delta_r / (delta_r + t_s + t_r)."""
    if delta_r <= 0 or t_s <= 0 or t_r <= 0:
        raise ValueError("all durations must be > 0")
    return delta_r / (delta_r + t_s + t_r)


@dataclass(frozen=True)
class Region:
    """Weighted part of the map plane: a union of axis-aligned boxes keyed
    by axis name, e.g. boxes=({"T_O": (15, 40)},)."""

    weight: float
    boxes: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("region weight must be > 0")

    def contains(self, coords: dict) -> bool:
        for box in self.boxes:
            ok = True
            for axis, (lo, hi) in box.items():
                v = coords.get(axis)
                if v is None or not (lo < v < hi):
                    ok = False
                    break
            if ok:
                return True
        return False


def _cell_weights(rmap: RestartTimeMap, regions) -> np.ndarray:
    w = np.zeros((rmap.x_values.size, rmap.y_values.size))
    for i, xv in enumerate(rmap.x_values):
        for j, yv in enumerate(rmap.y_values):
            coords = {rmap.x_name: xv, rmap.y_name: yv}
            for reg in regions:
                if reg.contains(coords):
                    w[i, j] = reg.weight
                    break
    return w


def weighted_availability(rmap: RestartTimeMap, regions, t_s: float,
                          t_r: float) -> float:
    """Region-weighted mean availability over the safe cells of a map.

    Cells outside every region get weight zero.  Raises when the map has no
    weighted safe cell at all.
    """
    weights = _cell_weights(rmap, regions)
    safe = rmap.kind == 2
    total_w = 0.0
    acc = 0.0
    for i, j in zip(*np.nonzero(safe)):
        w = weights[i, j]
        if w <= 0:
            continue
        acc += w * cell_availability(rmap.delta[i, j], t_s, t_r)
        total_w += w
    if total_w == 0.0:
        raise ValueError("no weighted safe cells in the map")
    return acc / total_w


def availability_breakdown(rmap: RestartTimeMap, regions, t_s: float,
                           t_r: float) -> dict:
    """Per-region mean availability plus the overall weighted figure."""
    weights = _cell_weights(rmap, regions)
    safe = rmap.kind == 2
    out = {"regions": [], "weighted_availability": None}
    for reg in regions:
        acc, cnt = 0.0, 0
        for i, j in zip(*np.nonzero(safe)):
            coords = {rmap.x_name: rmap.x_values[i], rmap.y_name: rmap.y_values[j]}
            if reg.contains(coords) and weights[i, j] == reg.weight:
                acc += cell_availability(rmap.delta[i, j], t_s, t_r)
                cnt += 1
        out["regions"].append({
            "name": reg.name or f"weight={reg.weight}",
            "weight": reg.weight,
            "safe_cells": cnt,
            "mean_availability": (acc / cnt) if cnt else None,
        })
    out["weighted_availability"] = weighted_availability(rmap, regions, t_s, t_r)
    return out
