"""Finding recurrent slowdown sites and tracking their jam state.

A bottleneck is a maximal connected group of cells that are each
congested (below the 30 mph line) for at least a minimum share of the
stream.  Bottlenecks get stable names b00, b01, ... ordered from most
to least congested, and a bottleneck counts as jammed in any minute
where at least half of its cells are congested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import is_congested
from .network import RoadNetwork

JAM_CELL_FRACTION = 0.5


@dataclass(frozen=True)
class Bottleneck:
    name: str
    cells: tuple[str, ...]
    congestion_rate: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cells": list(self.cells),
            "congestion_rate": round(self.congestion_rate, 6),
        }


def identify_bottlenecks(
    speeds: np.ndarray,
    cells: list[str],
    network: RoadNetwork,
    threshold: float = 0.05,
) -> list[Bottleneck]:
    """Group persistently congested cells into named bottlenecks.

    ``speeds`` is [n_cells, n_minutes] aligned with ``cells``.  Cells
    whose congested-minute share meets ``threshold`` are kept and split
    into connected components of the road graph; each component becomes
    one bottleneck.  Ordering (and therefore naming) is by descending
    mean congestion share, tie-broken by cell order, so a given stream
    always yields the same names.
    """
    if speeds.shape[0] != len(cells):
        raise ValueError("speeds rows must align with cells")
    rate = is_congested(speeds).mean(axis=1)
    hot = [cell for cell, r in zip(cells, rate) if r >= threshold]
    components = network.connected_components(hot)
    rate_of = dict(zip(cells, rate))
    scored = [
        (float(np.mean([rate_of[c] for c in comp])), comp) for comp in components
    ]
    order = {cell: i for i, cell in enumerate(cells)}
    scored.sort(key=lambda item: (-item[0], order[item[1][0]]))
    return [
        Bottleneck(name=f"b{i:02d}", cells=tuple(comp), congestion_rate=score)
        for i, (score, comp) in enumerate(scored)
    ]


def congested_matrix(
    speeds: np.ndarray, cells: list[str], bottleneck: Bottleneck
) -> np.ndarray:
    """Boolean [n_bottleneck_cells, n_minutes] congestion flags."""
    row = {c: i for i, c in enumerate(cells)}
    idx = [row[c] for c in bottleneck.cells]
    return is_congested(speeds[idx])


def jam_series(
    speeds: np.ndarray, cells: list[str], bottleneck: Bottleneck
) -> np.ndarray:
    """Boolean [n_minutes]: is the bottleneck jammed each minute."""
    cong = congested_matrix(speeds, cells, bottleneck)
    return cong.mean(axis=0) >= JAM_CELL_FRACTION


def jam_matrix(
    speeds: np.ndarray, cells: list[str], bottlenecks: list[Bottleneck]
) -> np.ndarray:
    """Stack jam_series for every bottleneck: [n_bottlenecks, n_minutes]."""
    if not bottlenecks:
        return np.zeros((0, speeds.shape[1]), dtype=bool)
    return np.stack([jam_series(speeds, cells, b) for b in bottlenecks])
