"""Decision-tree conditional distributions and greedy tree growth.

Each variable's CPD is a tree over its parents: internal nodes split
on a parent (full split on a discrete parent's values, binary
threshold on a continuous parent), leaves hold a multinomial (discrete
target) or binary-Gaussian (continuous target) posterior.  Growth is
greedy: at every leaf, apply the split with the largest strictly
positive score gain; candidates are scanned in (name, threshold) order
so ties resolve the same way on every platform.

Continuous-parent tests send absent values and values below the
threshold left, values at or above it right.  Continuous thresholds
come from a fixed per-variable candidate list (training deciles), and
a path may reuse a continuous parent only with a new threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .schema import CONTINUOUS, DISCRETE, CaseTable, Variable
from .scores import (
    DIRICHLET_ESS,
    PRESENCE_ESS,
    GaussianPosterior,
    GaussianPrior,
    multinomial_leaf_probs,
)

_LOG_2PI = math.log(2.0 * math.pi)
MIN_GAIN = 1e-9


@dataclass
class Priors:
    dirichlet_ess: float = DIRICHLET_ESS
    presence_ess: float = PRESENCE_ESS
    gaussian: GaussianPrior = field(default_factory=GaussianPrior)

    def to_dict(self) -> dict:
        return {
            "dirichlet_ess": self.dirichlet_ess,
            "presence_ess": self.presence_ess,
            "gaussian": self.gaussian.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Priors":
        return cls(
            dirichlet_ess=d["dirichlet_ess"],
            presence_ess=d["presence_ess"],
            gaussian=GaussianPrior.from_dict(d["gaussian"]),
        )


# ---------------------------------------------------------------------------
# vectorized group scores (one score per group in a partition of the rows)


def _group_scores_multinomial(
    group: np.ndarray, n_groups: int, codes: np.ndarray, arity: int, ess: float
) -> np.ndarray:
    counts = np.bincount(group * arity + codes, minlength=n_groups * arity)
    counts = counts.reshape(n_groups, arity).astype(float)
    alpha = ess / arity
    n = counts.sum(axis=1)
    return gammaln(ess) - gammaln(ess + n) + (gammaln(alpha + counts) - gammaln(alpha)).sum(axis=1)


def _group_scores_gaussian(
    group: np.ndarray,
    n_groups: int,
    values_std: np.ndarray,
    prior: GaussianPrior,
    presence_ess: float,
) -> np.ndarray:
    present = ~np.isnan(values_std)
    n_total = np.bincount(group, minlength=n_groups).astype(float)
    n_pres = np.bincount(group[present], minlength=n_groups).astype(float)
    n_abs = n_total - n_pres
    vals = values_std[present]
    gpres = group[present]
    s1 = np.bincount(gpres, weights=vals, minlength=n_groups)
    s2 = np.bincount(gpres, weights=vals * vals, minlength=n_groups)

    a = presence_ess / 2.0
    presence = (
        gammaln(presence_ess)
        - gammaln(presence_ess + n_total)
        + gammaln(a + n_abs)
        - gammaln(a)
        + gammaln(a + n_pres)
        - gammaln(a)
    )

    safe_n = np.maximum(n_pres, 1.0)
    mean = s1 / safe_n
    ss = np.maximum(s2 - safe_n * mean * mean, 0.0)
    kappa_n = prior.kappa0 + n_pres
    alpha_n = prior.alpha0 + n_pres / 2.0
    beta_n = (
        prior.beta0
        + 0.5 * ss
        + prior.kappa0 * n_pres * (mean - prior.mu0) ** 2 / (2.0 * kappa_n)
    )
    gauss = (
        -0.5 * n_pres * _LOG_2PI
        + 0.5 * (math.log(prior.kappa0) - np.log(kappa_n))
        + prior.alpha0 * math.log(prior.beta0)
        - alpha_n * np.log(beta_n)
        + gammaln(alpha_n)
        - gammaln(prior.alpha0)
    )
    gauss = np.where(n_pres > 0, gauss, 0.0)
    return presence + gauss


# ---------------------------------------------------------------------------
# tree nodes


@dataclass
class MultinomialLeaf:
    counts: np.ndarray
    ess: float

    def probs(self) -> np.ndarray:
        return multinomial_leaf_probs(self.counts, self.ess)

    def to_dict(self) -> dict:
        return {"type": "leaf_multinomial", "counts": [int(c) for c in self.counts]}


@dataclass
class GaussianLeaf:
    n_present: int
    n_absent: int
    posterior: GaussianPosterior  # over standardized values
    presence_ess: float

    def p_present(self) -> float:
        a = self.presence_ess / 2.0
        return (self.n_present + a) / (self.n_present + self.n_absent + self.presence_ess)

    def to_dict(self) -> dict:
        return {
            "type": "leaf_gaussian",
            "n_present": self.n_present,
            "n_absent": self.n_absent,
            "posterior": self.posterior.to_dict(),
        }


@dataclass
class DiscreteSplit:
    var: str
    children: list

    def to_dict(self) -> dict:
        return {
            "type": "split_discrete",
            "var": self.var,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass
class ContinuousSplit:
    var: str
    threshold: float
    left: object  # absent or value < threshold
    right: object

    def to_dict(self) -> dict:
        return {
            "type": "split_continuous",
            "var": self.var,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }


def _node_from_dict(d: dict, priors: Priors):
    kind = d["type"]
    if kind == "leaf_multinomial":
        return MultinomialLeaf(np.array(d["counts"], dtype=np.int64), priors.dirichlet_ess)
    if kind == "leaf_gaussian":
        return GaussianLeaf(
            d["n_present"],
            d["n_absent"],
            GaussianPosterior.from_dict(d["posterior"]),
            priors.presence_ess,
        )
    if kind == "split_discrete":
        return DiscreteSplit(d["var"], [_node_from_dict(c, priors) for c in d["children"]])
    if kind == "split_continuous":
        return ContinuousSplit(
            d["var"],
            d["threshold"],
            _node_from_dict(d["left"], priors),
            _node_from_dict(d["right"], priors),
        )
    raise ValueError(f"unknown node type {kind!r}")


@dataclass
class DecisionTreeCPD:
    target: str
    root: object
    score: float
    center: float = 0.0  # standardization of a continuous target
    scale: float = 1.0

    def parents_used(self) -> list[str]:
        used: set[str] = set()

        def walk(node):
            if isinstance(node, DiscreteSplit):
                used.add(node.var)
                for child in node.children:
                    walk(child)
            elif isinstance(node, ContinuousSplit):
                used.add(node.var)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return sorted(used)

    def leaf_for(self, assignment: dict):
        """Follow the path for an assignment; None if a path var is unset.

        Continuous absence must be explicit: the var maps to None/NaN.
        A var missing from the dict entirely means unobserved.
        """
        node = self.root
        while not isinstance(node, (MultinomialLeaf, GaussianLeaf)):
            if node.var not in assignment:
                return None
            value = assignment[node.var]
            if isinstance(node, DiscreteSplit):
                node = node.children[int(value)]
            else:
                absent = value is None or (isinstance(value, float) and math.isnan(value))
                node = node.left if absent or value < node.threshold else node.right
        return node

    def leaf_rows(self, table: CaseTable) -> list[tuple[object, np.ndarray]]:
        """Partition all rows by the leaf they reach (vectorized)."""
        out: list[tuple[object, np.ndarray]] = []

        def walk(node, rows: np.ndarray):
            if isinstance(node, (MultinomialLeaf, GaussianLeaf)):
                out.append((node, rows))
                return
            col = table.column(node.var)[rows]
            if isinstance(node, DiscreteSplit):
                for code, child in enumerate(node.children):
                    walk(child, rows[col == code])
            else:
                left = np.isnan(col) | (col < node.threshold)
                walk(node.left, rows[left])
                walk(node.right, rows[~left])

        walk(self.root, np.arange(table.n_rows))
        return out

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "score": self.score,
            "center": self.center,
            "scale": self.scale,
            "root": self.root.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, priors: Priors) -> "DecisionTreeCPD":
        return cls(
            target=d["target"],
            root=_node_from_dict(d["root"], priors),
            score=d["score"],
            center=d["center"],
            scale=d["scale"],
        )


# ---------------------------------------------------------------------------
# growth


class _Grower:
    def __init__(
        self,
        target: Variable,
        parents: list[Variable],
        table: CaseTable,
        priors: Priors,
        thresholds: dict[str, tuple[float, ...]],
        center: float,
        scale: float,
    ):
        self.target = target
        self.parents = sorted(parents, key=lambda v: v.name)
        self.table = table
        self.priors = priors
        self.thresholds = thresholds
        if target.kind == DISCRETE:
            self.codes = table.column(target.name)
        else:
            self.values_std = (table.column(target.name) - center) / scale
        self.total_score = 0.0

    def node_score(self, rows: np.ndarray) -> float:
        group = np.zeros(rows.size, dtype=np.int64)
        if self.target.kind == DISCRETE:
            s = _group_scores_multinomial(
                group, 1, self.codes[rows], self.target.arity, self.priors.dirichlet_ess
            )
        else:
            s = _group_scores_gaussian(
                group, 1, self.values_std[rows], self.priors.gaussian, self.priors.presence_ess
            )
        return float(s[0])

    def split_scores(self, rows: np.ndarray, group: np.ndarray, n_groups: int) -> float:
        if self.target.kind == DISCRETE:
            s = _group_scores_multinomial(
                group, n_groups, self.codes[rows], self.target.arity, self.priors.dirichlet_ess
            )
        else:
            s = _group_scores_gaussian(
                group, n_groups, self.values_std[rows], self.priors.gaussian, self.priors.presence_ess
            )
        return float(s.sum())

    def make_leaf(self, rows: np.ndarray):
        if self.target.kind == DISCRETE:
            counts = np.bincount(self.codes[rows], minlength=self.target.arity)
            return MultinomialLeaf(counts, self.priors.dirichlet_ess)
        vals = self.values_std[rows]
        present = vals[~np.isnan(vals)]
        from .scores import gaussian_posterior

        return GaussianLeaf(
            n_present=int(present.size),
            n_absent=int(vals.size - present.size),
            posterior=gaussian_posterior(present, self.priors.gaussian),
            presence_ess=self.priors.presence_ess,
        )

    def grow(self, rows: np.ndarray, used_discrete: frozenset, used_cuts: frozenset):
        here = self.node_score(rows)
        best = None  # (gain, kind, var, threshold, partition info)
        if rows.size:
            for parent in self.parents:
                col = self.table.column(parent.name)[rows]
                if parent.kind == DISCRETE:
                    if parent.name in used_discrete:
                        continue
                    counts = np.bincount(col, minlength=parent.arity)
                    if np.count_nonzero(counts) < 2:
                        continue
                    gain = self.split_scores(rows, col, parent.arity) - here
                    if gain > MIN_GAIN and (best is None or gain > best[0] + 1e-10):
                        best = (gain, DISCRETE, parent, None)
                else:
                    for thr in self.thresholds.get(parent.name, ()):
                        if (parent.name, thr) in used_cuts:
                            continue
                        right = ~(np.isnan(col) | (col < thr))
                        n_right = int(right.sum())
                        if n_right == 0 or n_right == rows.size:
                            continue
                        gain = self.split_scores(rows, right.astype(np.int64), 2) - here
                        if gain > MIN_GAIN and (best is None or gain > best[0] + 1e-10):
                            best = (gain, CONTINUOUS, parent, thr)
        if best is None:
            self.total_score += here
            return self.make_leaf(rows)
        _, kind, parent, thr = best
        col = self.table.column(parent.name)[rows]
        if kind == DISCRETE:
            children = [
                self.grow(rows[col == code], used_discrete | {parent.name}, used_cuts)
                for code in range(parent.arity)
            ]
            return DiscreteSplit(parent.name, children)
        left_mask = np.isnan(col) | (col < thr)
        cuts = used_cuts | {(parent.name, thr)}
        return ContinuousSplit(
            parent.name,
            thr,
            self.grow(rows[left_mask], used_discrete, cuts),
            self.grow(rows[~left_mask], used_discrete, cuts),
        )


def grow_tree(
    target: Variable,
    allowed_parents: list[Variable],
    table: CaseTable,
    priors: Priors,
    thresholds: dict[str, tuple[float, ...]],
    standardization: dict[str, tuple[float, float]] | None = None,
) -> DecisionTreeCPD:
    """Greedy top-down tree growth over the allowed parents."""
    center, scale = 0.0, 1.0
    if target.kind == CONTINUOUS and standardization is not None:
        center, scale = standardization[target.name]
    grower = _Grower(target, allowed_parents, table, priors, thresholds, center, scale)
    root = grower.grow(np.arange(table.n_rows), frozenset(), frozenset())
    return DecisionTreeCPD(
        target=target.name, root=root, score=grower.total_score, center=center, scale=scale
    )
