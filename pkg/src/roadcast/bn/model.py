"""The learned network: DAG + one decision-tree CPD per variable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .schema import Variable
from .tree import DecisionTreeCPD, Priors

SCHEMA_VERSION = 1


def reachable(src: str, dst: str, children: dict[str, set[str]]) -> bool:
    """Is there a directed path src -> ... -> dst?"""
    if src == dst:
        return True
    seen = {src}
    stack = [src]
    while stack:
        node = stack.pop()
        for nxt in children.get(node, ()):
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


@dataclass
class BayesNet:
    variables: list[Variable]
    edges: list[tuple[str, str]]  # (parent, child)
    cpds: dict[str, DecisionTreeCPD]
    priors: Priors
    thresholds: dict[str, tuple[float, ...]]
    standardization: dict[str, tuple[float, float]]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.by_name = {v.name: v for v in self.variables}
        self.edges = sorted(tuple(e) for e in self.edges)
        self.validate()

    def validate(self) -> None:
        children: dict[str, set[str]] = {v.name: set() for v in self.variables}
        for parent, child in self.edges:
            if parent not in self.by_name or child not in self.by_name:
                raise ValueError(f"edge ({parent}, {child}) names unknown variable")
            children[parent].add(child)
        # Cycle check over the whole graph.
        order = self.topological_order(children)
        if len(order) != len(self.variables):
            raise ValueError("edge set contains a cycle")
        parents = self.parent_map()
        for name, cpd in self.cpds.items():
            extra = set(cpd.parents_used()) - parents[name]
            if extra:
                raise ValueError(f"{name}: tree splits on non-parents {sorted(extra)}")

    def parent_map(self) -> dict[str, set[str]]:
        parents: dict[str, set[str]] = {v.name: set() for v in self.variables}
        for parent, child in self.edges:
            parents[child].add(parent)
        return parents

    def topological_order(self, children: dict[str, set[str]] | None = None) -> list[str]:
        if children is None:
            children = {v.name: set() for v in self.variables}
            for parent, child in self.edges:
                children[parent].add(child)
        indeg = {v.name: 0 for v in self.variables}
        for parent in children:
            for child in children[parent]:
                indeg[child] += 1
        ready = sorted(name for name, d in indeg.items() if d == 0)
        order: list[str] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            inserted = False
            for child in sorted(children.get(node, ())):
                indeg[child] -= 1
                if indeg[child] == 0:
                    ready.append(child)
                    inserted = True
            if inserted:
                ready.sort()
        return order

    def total_score(self) -> float:
        return sum(cpd.score for cpd in self.cpds.values())

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "variables": [v.to_dict() for v in self.variables],
            "edges": [list(e) for e in self.edges],
            "priors": self.priors.to_dict(),
            "thresholds": {k: list(v) for k, v in sorted(self.thresholds.items())},
            "standardization": {k: list(v) for k, v in sorted(self.standardization.items())},
            "cpds": {k: self.cpds[k].to_dict() for k in sorted(self.cpds)},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BayesNet":
        priors = Priors.from_dict(d["priors"])
        return cls(
            variables=[Variable.from_dict(v) for v in d["variables"]],
            edges=[tuple(e) for e in d["edges"]],
            cpds={k: DecisionTreeCPD.from_dict(v, priors) for k, v in d["cpds"].items()},
            priors=priors,
            thresholds={k: tuple(v) for k, v in d["thresholds"].items()},
            standardization={k: (v[0], v[1]) for k, v in d["standardization"].items()},
            metadata=d.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BayesNet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
