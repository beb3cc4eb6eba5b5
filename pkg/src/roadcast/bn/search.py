"""Greedy hill-climbing structure search with tree-CPD rescoring.

Moves are edge additions, deletions, and (optionally) reversals; a
candidate move is scored by re-growing the affected variables' trees
and taking the change in total score.  Every accepted move must
strictly increase the score, acyclicity is checked per move, and the
climb restarts from seeded random graphs to escape shallow optima.

Because the score decomposes over variables, a move's gain only
changes when its child's parent set changes; gains are cached per
child and recomputed lazily.

``target_sinks`` mode restricts candidate edges to evidence -> target,
which is how the forecasting net is trained: targets never feed other
variables, so the search reduces to picking parents per target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BayesNet, reachable
from .schema import CaseTable, Variable, continuous_standardization, decile_thresholds
from .tree import MIN_GAIN, DecisionTreeCPD, Priors, grow_tree


@dataclass
class SearchConfig:
    max_parents: int = 8
    restarts: int = 3  # total climbs: the first from an empty graph, the rest from random graphs
    allow_reversals: bool = True
    target_sinks: bool = False
    seed: int = 0
    random_edge_prob: float = 0.15


class _Searcher:
    def __init__(
        self,
        variables: list[Variable],
        table: CaseTable,
        config: SearchConfig,
        priors: Priors,
        thresholds: dict[str, tuple[float, ...]],
        standardization: dict[str, tuple[float, float]],
    ):
        self.variables = variables
        self.names = sorted(v.name for v in variables)
        self.by_name = {v.name: v for v in variables}
        self.table = table
        self.config = config
        self.priors = priors
        self.thresholds = thresholds
        self.standardization = standardization
        self.score_cache: dict[tuple[str, frozenset], float] = {}
        self.tree_cache: dict[tuple[str, frozenset], DecisionTreeCPD] = {}

    # -- scoring -------------------------------------------------------------

    def family_score(self, child: str, parents: frozenset) -> float:
        key = (child, parents)
        if key not in self.score_cache:
            tree = self.grow(child, parents)
            self.score_cache[key] = tree.score
        return self.score_cache[key]

    def grow(self, child: str, parents: frozenset) -> DecisionTreeCPD:
        key = (child, parents)
        if key not in self.tree_cache:
            self.tree_cache[key] = grow_tree(
                self.by_name[child],
                [self.by_name[p] for p in sorted(parents)],
                self.table,
                self.priors,
                self.thresholds,
                self.standardization,
            )
            # Trees are memory-heavy; keep only scores for big caches.
            if len(self.tree_cache) > 512:
                self.tree_cache.pop(next(iter(self.tree_cache)))
        return self.tree_cache[key]

    # -- legality -------------------------------------------------------------

    def edge_allowed(self, parent: str, child: str) -> bool:
        if parent == child:
            return False
        if self.config.target_sinks:
            return (
                self.by_name[parent].role == "evidence"
                and self.by_name[child].role == "target"
            )
        return True

    # -- climb ----------------------------------------------------------------

    def climb(self, parents: dict[str, set[str]]) -> tuple[float, dict[str, set[str]]]:
        children: dict[str, set[str]] = {n: set() for n in self.names}
        for child, pset in parents.items():
            for p in pset:
                children[p].add(child)
        scores = {n: self.family_score(n, frozenset(parents[n])) for n in self.names}
        # child -> list of (gain, op, x, y); ops in fixed order for determinism
        move_cache: dict[str, list] = {}
        stale = set(self.names)

        def child_moves(y: str) -> list:
            moves = []
            pa = parents[y]
            base = scores[y]
            for x in self.names:
                if x in pa:
                    gain = self.family_score(y, frozenset(pa - {x})) - base
                    moves.append((gain, "del", x, y))
                elif (
                    self.edge_allowed(x, y)
                    and len(pa) < self.config.max_parents
                    and not reachable(y, x, children)
                ):
                    gain = self.family_score(y, frozenset(pa | {x})) - base
                    moves.append((gain, "add", x, y))
            return moves

        while True:
            for y in sorted(stale):
                move_cache[y] = child_moves(y)
            stale.clear()
            best = None
            for y in self.names:
                for move in move_cache[y]:
                    if move[0] > MIN_GAIN and (best is None or move[0] > best[0] + 1e-10):
                        best = move
            if self.config.allow_reversals and not self.config.target_sinks:
                for y in self.names:
                    for x in sorted(parents[y]):
                        if not self.edge_allowed(y, x):
                            continue
                        if len(parents[x]) >= self.config.max_parents:
                            continue
                        # Removing x->y then adding y->x: cycle iff a path
                        # x ~> y survives without the direct edge.
                        children[x].discard(y)
                        cycles = reachable(x, y, children)
                        children[x].add(y)
                        if cycles:
                            continue
                        gain = (
                            self.family_score(y, frozenset(parents[y] - {x}))
                            - scores[y]
                            + self.family_score(x, frozenset(parents[x] | {y}))
                            - scores[x]
                        )
                        if gain > MIN_GAIN and (best is None or gain > best[0] + 1e-10):
                            best = (gain, "rev", x, y)
            if best is None:
                break
            _, op, x, y = best
            if op == "add":
                parents[y].add(x)
                children[x].add(y)
                stale.add(y)
            elif op == "del":
                parents[y].discard(x)
                children[x].discard(y)
                stale.add(y)
            else:
                parents[y].discard(x)
                children[x].discard(y)
                parents[x].add(y)
                children[y].add(x)
                stale.update((x, y))
            for n in stale:
                scores[n] = self.family_score(n, frozenset(parents[n]))
            # Any child whose legal move set may have shifted (cycle phases)
            # gets refreshed lazily: additions/deletions elsewhere can change
            # reachability, so refresh everything whose cached moves involve
            # x or y, plus children downstream.  Simpler and safe: mark all.
            stale = set(self.names)

        total = sum(scores.values())
        return total, parents

    def random_start(self, rng: np.random.Generator) -> dict[str, set[str]]:
        parents: dict[str, set[str]] = {n: set() for n in self.names}
        children: dict[str, set[str]] = {n: set() for n in self.names}
        pairs = [(x, y) for x in self.names for y in self.names if self.edge_allowed(x, y)]
        rng.shuffle(pairs)
        for x, y in pairs:
            if rng.random() >= self.config.random_edge_prob:
                continue
            if len(parents[y]) >= self.config.max_parents:
                continue
            if reachable(y, x, children):
                continue
            parents[y].add(x)
            children[x].add(y)
        return parents


def structure_search(
    variables: list[Variable],
    table: CaseTable,
    config: SearchConfig | None = None,
    priors: Priors | None = None,
) -> BayesNet:
    """Learn a BayesNet over the variables from the case table."""
    if len(variables) < 2:
        raise ValueError("need at least two variables")
    if table.n_rows == 0:
        raise ValueError("empty case table")
    config = config or SearchConfig()
    priors = priors or Priors()
    thresholds = {
        v.name: decile_thresholds(table.column(v.name))
        for v in variables
        if v.kind == "continuous"
    }
    standardization = {
        v.name: continuous_standardization(table.column(v.name))
        for v in variables
        if v.kind == "continuous"
    }
    searcher = _Searcher(variables, table, config, priors, thresholds, standardization)

    seeds = np.random.SeedSequence(config.seed).spawn(max(1, config.restarts))
    best: tuple[float, dict[str, set[str]]] | None = None
    for restart in range(max(1, config.restarts)):
        if restart == 0:
            start = {n: set() for n in searcher.names}
        else:
            start = searcher.random_start(np.random.default_rng(seeds[restart]))
        if config.max_parents == 0:
            start = {n: set() for n in searcher.names}
            total = sum(searcher.family_score(n, frozenset()) for n in searcher.names)
            result = (total, start)
        else:
            result = searcher.climb(start)
        if best is None or result[0] > best[0] + 1e-10:
            best = result

    _, parents = best
    cpds: dict[str, DecisionTreeCPD] = {}
    edges: list[tuple[str, str]] = []
    for name in searcher.names:
        tree = searcher.grow(name, frozenset(parents[name]))
        cpds[name] = tree
        # Parents the tree never splits on carry no signal; drop them.
        for p in tree.parents_used():
            edges.append((p, name))
    return BayesNet(
        variables=list(variables),
        edges=edges,
        cpds=cpds,
        priors=priors,
        thresholds=thresholds,
        standardization=standardization,
        metadata={"seed": config.seed, "rows": table.n_rows, "max_parents": config.max_parents},
    )
