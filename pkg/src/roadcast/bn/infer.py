"""Forecasts from a learned net: exact tree lookup or likelihood weighting.

When the evidence pins every variable on the target tree's path, the
reached leaf is the answer and no sampling happens.  Otherwise the
posterior is estimated by likelihood weighting: samples flow through
the net in topological order, evidence variables multiply in their
leaf likelihood instead of being sampled.  Sampling is seeded and
vectorized across samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import BayesNet
from .schema import CONTINUOUS, DISCRETE
from .tree import ContinuousSplit, DiscreteSplit, GaussianLeaf, MultinomialLeaf

NO_EVENT = "no_event"
BUCKET_GE60 = ">=60"

DEFAULT_SAMPLES = 10_000


def display_bucket(p_present: float, mean_minutes: float) -> str | int:
    """Forecast display rule: no-event, minutes 1..59, or the >=60 bucket."""
    if p_present < 0.5:
        return NO_EVENT
    if mean_minutes >= 60.0:
        return BUCKET_GE60
    return int(min(59, max(1, round(mean_minutes))))


@dataclass
class Forecast:
    target: str
    p_present: float
    mean_minutes: float
    std_minutes: float
    display_bucket: str | int
    reliability_flag: bool | None = None
    surprise_flag: bool | None = None

    def to_dict(self) -> dict:
        std = self.std_minutes
        return {
            "target": self.target,
            "p_present": round(float(self.p_present), 6),
            "mean_minutes": round(float(self.mean_minutes), 3),
            "std_minutes": None if std is None or not math.isfinite(std) else round(float(std), 3),
            "display_bucket": self.display_bucket,
            "reliability_flag": self.reliability_flag,
            "surprise_flag": self.surprise_flag,
        }


def normalize_evidence(net: BayesNet, evidence: dict) -> dict:
    """Map label/raw evidence values to codes and floats (NaN = absent)."""
    assignment: dict[str, float | int] = {}
    for name, value in evidence.items():
        if name not in net.by_name:
            raise ValueError(f"evidence for unknown variable {name!r}")
        var = net.by_name[name]
        if var.kind == DISCRETE:
            if value is None or isinstance(value, float) and math.isnan(value):
                raise ValueError(f"{name}: discrete evidence cannot be absent")
            assignment[name] = var.code_of(value)
        else:
            if value is None:
                assignment[name] = math.nan
            elif isinstance(value, (int, float, np.floating, np.integer)):
                assignment[name] = float(value)
            else:
                raise ValueError(f"{name}: continuous evidence must be a number or None")
    return assignment


def _leaf_forecast(target: str, leaf: GaussianLeaf, center: float, scale: float) -> Forecast:
    p = leaf.p_present()
    mean = leaf.posterior.predictive_mean() * scale + center
    std = leaf.posterior.predictive_std() * scale
    return Forecast(
        target=target,
        p_present=p,
        mean_minutes=mean,
        std_minutes=std,
        display_bucket=display_bucket(p, mean),
    )


# ---------------------------------------------------------------------------
# vectorized likelihood weighting


def _partition_samples(root, cols: dict[str, np.ndarray], idx: np.ndarray):
    """Yield (leaf, sample indices) pairs for the current sample columns."""
    if isinstance(root, (MultinomialLeaf, GaussianLeaf)):
        yield root, idx
        return
    col = cols[root.var][idx]
    if isinstance(root, DiscreteSplit):
        for code, child in enumerate(root.children):
            sub = idx[col == code]
            if sub.size:
                yield from _partition_samples(child, cols, sub)
    else:
        left = np.isnan(col) | (col < root.threshold)
        if left.any():
            yield from _partition_samples(root.left, cols, idx[left])
        if (~left).any():
            yield from _partition_samples(root.right, cols, idx[~left])


def _gaussian_leaf_loglik(leaf: GaussianLeaf, value: float, center: float, scale: float) -> float:
    p = leaf.p_present()
    if math.isnan(value):
        return math.log(max(1.0 - p, 1e-300))
    post = leaf.posterior
    df = 2.0 * post.alpha
    t_scale = math.sqrt(post.beta * (post.kappa + 1.0) / (post.alpha * post.kappa))
    z = (value - center) / scale
    density = stats.t.pdf(z, df, loc=post.mu, scale=t_scale) / scale
    return math.log(max(p * density, 1e-300))


def _sample_gaussian_leaf(
    leaf: GaussianLeaf, rng: np.random.Generator, size: int, center: float, scale: float
) -> np.ndarray:
    p = leaf.p_present()
    post = leaf.posterior
    df = 2.0 * post.alpha
    t_scale = math.sqrt(post.beta * (post.kappa + 1.0) / (post.alpha * post.kappa))
    present = rng.random(size) < p
    draws = post.mu + t_scale * rng.standard_t(df, size=size)
    out = draws * scale + center
    out[~present] = np.nan
    return out


def likelihood_weighted_samples(
    net: BayesNet,
    assignment: dict,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Draw weighted samples of every variable given the evidence.

    Returns (columns, log-weights); evidence columns are constant.
    """
    cols: dict[str, np.ndarray] = {}
    logw = np.zeros(n_samples)
    all_idx = np.arange(n_samples)
    for name in net.topological_order():
        var = net.by_name[name]
        cpd = net.cpds[name]
        center, scale = net.standardization.get(name, (0.0, 1.0))
        if name in assignment:
            value = assignment[name]
            for leaf, idx in _partition_samples(cpd.root, cols, all_idx):
                if var.kind == DISCRETE:
                    probs = leaf.probs()
                    logw[idx] += math.log(max(float(probs[int(value)]), 1e-300))
                else:
                    logw[idx] += _gaussian_leaf_loglik(leaf, value, center, scale)
            if var.kind == DISCRETE:
                cols[name] = np.full(n_samples, int(value), dtype=np.int64)
            else:
                cols[name] = np.full(n_samples, float(value))
        else:
            if var.kind == DISCRETE:
                out = np.empty(n_samples, dtype=np.int64)
                for leaf, idx in _partition_samples(cpd.root, cols, all_idx):
                    cum = np.cumsum(leaf.probs())
                    out[idx] = np.searchsorted(cum, rng.random(idx.size), side="right")
                np.clip(out, 0, var.arity - 1, out=out)
            else:
                out = np.empty(n_samples)
                for leaf, idx in _partition_samples(cpd.root, cols, all_idx):
                    out[idx] = _sample_gaussian_leaf(leaf, rng, idx.size, center, scale)
            cols[name] = out
    return cols, logw


def _weights(logw: np.ndarray) -> np.ndarray:
    w = np.exp(logw - logw.max())
    total = w.sum()
    if total <= 0:
        raise ValueError("all likelihood weights vanished")
    return w / total


def predict(
    net: BayesNet,
    evidence: dict,
    target: str,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> Forecast:
    """Forecast a continuous target under full or partial evidence."""
    if target not in net.by_name:
        raise ValueError(f"unknown target {target!r}")
    if net.by_name[target].kind != CONTINUOUS:
        raise ValueError(f"{target} is not a continuous variable")
    assignment = normalize_evidence(net, evidence)
    assignment.pop(target, None)
    cpd = net.cpds[target]
    center, scale = net.standardization.get(target, (0.0, 1.0))
    leaf = cpd.leaf_for(assignment)
    if leaf is not None:
        return _leaf_forecast(target, leaf, center, scale)
    rng = np.random.default_rng(seed)
    cols, logw = likelihood_weighted_samples(net, assignment, n_samples, rng)
    w = _weights(logw)
    values = cols[target]
    present = ~np.isnan(values)
    p_present = float(w[present].sum())
    if present.any():
        wp = w[present] / w[present].sum()
        mean = float(np.sum(wp * values[present]))
        var = float(np.sum(wp * (values[present] - mean) ** 2))
        std = math.sqrt(max(var, 0.0))
    else:
        mean, std = center, math.inf
    return Forecast(
        target=target,
        p_present=p_present,
        mean_minutes=mean,
        std_minutes=std,
        display_bucket=display_bucket(p_present, mean),
    )


def discrete_posterior(
    net: BayesNet,
    evidence: dict,
    target: str,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> np.ndarray:
    """Posterior distribution over a discrete target's values."""
    if net.by_name[target].kind != DISCRETE:
        raise ValueError(f"{target} is not discrete")
    assignment = normalize_evidence(net, evidence)
    assignment.pop(target, None)
    cpd = net.cpds[target]
    leaf = cpd.leaf_for(assignment)
    if leaf is not None:
        return leaf.probs()
    rng = np.random.default_rng(seed)
    cols, logw = likelihood_weighted_samples(net, assignment, n_samples, rng)
    w = _weights(logw)
    arity = net.by_name[target].arity
    probs = np.bincount(cols[target], weights=w, minlength=arity)
    return probs / probs.sum()
