"""Sensed road network topology: cells, adjacency, and named regions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class Region:
    """A named, connected group of cells with a planted congestion regime."""

    name: str
    cells: list[str]
    road: str = "I-5"
    direction: str = "SB"
    landmark: str = ""


@dataclass
class RoadNetwork:
    """Cell topology of the sensed highway system.

    ``adjacency`` maps a cell to its downstream-adjacent cells. Connectivity
    checks treat adjacency as undirected.
    """

    cells: list[str]
    adjacency: dict[str, list[str]]
    regions: list[Region] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if len(set(self.cells)) != len(self.cells):
            raise ValueError("cell identifiers must be unique")
        known = set(self.cells)
        for cell, nbrs in self.adjacency.items():
            if cell not in known:
                raise ValueError(f"adjacency references unknown cell {cell!r}")
            if cell in nbrs:
                raise ValueError(f"adjacency must be irreflexive ({cell!r})")
            for n in nbrs:
                if n not in known:
                    raise ValueError(f"adjacency references unknown cell {n!r}")
        for region in self.regions:
            if not region.cells:
                raise ValueError(f"region {region.name!r} is empty")
            for c in region.cells:
                if c not in known:
                    raise ValueError(
                        f"region {region.name!r} references unknown cell {c!r}"
                    )
            if not self.is_connected(region.cells):
                raise ValueError(f"region {region.name!r} is not connected")

    def cell_index(self, cell: str) -> int:
        return self.cells.index(cell)

    def undirected_neighbors(self) -> dict[str, set[str]]:
        nbrs: dict[str, set[str]] = {c: set() for c in self.cells}
        for cell, downs in self.adjacency.items():
            for d in downs:
                nbrs[cell].add(d)
                nbrs[d].add(cell)
        return nbrs

    def is_connected(self, cells) -> bool:
        cells = list(cells)
        if not cells:
            return False
        group = set(cells)
        nbrs = self.undirected_neighbors()
        seen = {cells[0]}
        stack = [cells[0]]
        while stack:
            c = stack.pop()
            for n in sorted(nbrs[c]):
                if n in group and n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen == group

    def connected_components(self, cells) -> list[list[str]]:
        """Maximal connected components of a cell subset, each in cell order."""
        group = set(cells)
        nbrs = self.undirected_neighbors()
        order = {c: i for i, c in enumerate(self.cells)}
        seen: set[str] = set()
        components = []
        for c in sorted(group, key=order.get):
            if c in seen:
                continue
            comp = {c}
            stack = [c]
            seen.add(c)
            while stack:
                x = stack.pop()
                for n in sorted(nbrs[x]):
                    if n in group and n not in seen:
                        seen.add(n)
                        comp.add(n)
                        stack.append(n)
            components.append(sorted(comp, key=order.get))
        return components

    def region_by_name(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(f"unknown region {name!r}")

    def to_dict(self) -> dict:
        return {
            "cells": list(self.cells),
            "adjacency": {c: list(v) for c, v in self.adjacency.items()},
            "regions": [
                {
                    "name": r.name,
                    "cells": list(r.cells),
                    "road": r.road,
                    "direction": r.direction,
                    "landmark": r.landmark,
                }
                for r in self.regions
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoadNetwork":
        regions = [
            Region(
                name=r["name"],
                cells=list(r["cells"]),
                road=r.get("road", "I-5"),
                direction=r.get("direction", "SB"),
                landmark=r.get("landmark", ""),
            )
            for r in d.get("regions", [])
        ]
        return cls(
            cells=list(d["cells"]),
            adjacency={c: list(v) for c, v in d["adjacency"].items()},
            regions=regions,
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RoadNetwork":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def chain_network(n_regions: int = 8, cells_per_region: int = 4) -> RoadNetwork:
    """Linear highway: regions of consecutive cells separated by buffer cells.

    Cell ``c`` feeds ``c+1`` downstream. Region k owns cells
    [k*(cpr+1), k*(cpr+1)+cpr); the cell after each region is a buffer that
    belongs to no region.
    """
    roads = ["I-5", "I-405", "SR-520", "I-90", "SR-99", "SR-167", "I-705", "SR-18"]
    landmarks = [
        "NE 45TH", "SR-520", "I-90", "S 188TH",
        "NE 8TH", "SR-18", "PORT OF TACOMA", "JAMES ST",
    ]
    span = cells_per_region + 1
    n_cells = n_regions * span
    cells = [f"c{i:03d}" for i in range(n_cells)]
    adjacency = {cells[i]: [cells[i + 1]] for i in range(n_cells - 1)}
    adjacency[cells[-1]] = []
    regions = []
    for k in range(n_regions):
        start = k * span
        regions.append(
            Region(
                name=f"R{k}",
                cells=cells[start : start + cells_per_region],
                road=roads[k % len(roads)],
                direction="SB" if k % 2 == 0 else "NB",
                landmark=landmarks[k % len(landmarks)],
            )
        )
    return RoadNetwork(cells=cells, adjacency=adjacency, regions=regions)
