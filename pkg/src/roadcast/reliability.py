"""Meta-models that predict whether a base forecast will hit tolerance.

The base net's exact per-row forecasts on a validation slice are
labeled success/failure with the shared tolerance rule, then a small
classifier is trained per (bottleneck, target kind) over the same
observation schema.  Its P(success | observations) drives the '?'
overlay: a forecast is flagged when that probability falls below the
flag threshold.

Labels must come from cases the base net never trained on, so the
validation slice is carved off the end of the training span before the
base net is fit (see pipeline.fit_models).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bn.evaluate import (
    DEFAULT_TOLERANCE_MIN,
    EvalGroup,
    row_forecast_params,
    success_vector,
)
from .bn.infer import Forecast, discrete_posterior
from .bn.model import BayesNet
from .bn.schema import CaseTable, Variable, sequential_split
from .bn.search import SearchConfig, structure_search

__all__ = [
    "FLAG_THRESHOLD",
    "LABEL",
    "ReliabilityCases",
    "ReliabilityEntry",
    "ReliabilityModel",
    "label_reliability",
    "train_reliability",
    "annotate",
]

FLAG_THRESHOLD = 0.6
HOLDOUT_FRACTION = 0.75  # classifier train/holdout split within the labeled cases
MAX_PARENTS = 4
SCHEMA_VERSION = 1

LABEL = "forecast_ok"
LABEL_LEVELS = ("failure", "success")
KINDS = ("clear", "jam")


def label_variable() -> Variable:
    return Variable(LABEL, "discrete", arity=2, levels=LABEL_LEVELS, role="target")


def _kind_of_target(target: str) -> str:
    if target.endswith("_time_to_clear"):
        return "clear"
    if target.endswith("_time_to_jam"):
        return "jam"
    raise ValueError(f"{target!r} is not a time-to-event target")


@dataclass
class ReliabilityCases:
    """Labeled observations for one (bottleneck, kind) pair.

    ``table`` holds the observation schema plus the success label;
    the stored forecast parameters and actuals let any label be
    recomputed and checked against the tolerance rule.
    """

    bottleneck: str
    kind: str
    table: CaseTable
    p_present: np.ndarray
    mean_minutes: np.ndarray
    actual_minutes: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.table.column(LABEL)


def label_reliability(
    base_net: BayesNet,
    cases: CaseTable,
    groups: list[EvalGroup],
    tolerance: float = DEFAULT_TOLERANCE_MIN,
) -> list[ReliabilityCases]:
    """Score the base net on each case and label the outcome.

    For every bottleneck, rows where it is jammed become clear-forecast
    cases and the rest become jam-forecast cases; each is labeled
    success/failure by the same rule evaluate() uses.
    """
    if cases.n_rows == 0:
        raise ValueError("no cases to label")
    evidence_vars = [v for v in cases.variables if v.role == "evidence"]
    variables = evidence_vars + [label_variable()]
    out: list[ReliabilityCases] = []
    for group in groups:
        jammed = cases.column(group.state_var) == 1
        for kind, target, mask in (
            ("clear", group.clear_target, jammed),
            ("jam", group.jam_target, ~jammed),
        ):
            rows = np.flatnonzero(mask)
            p, mean = row_forecast_params(base_net, cases, target)
            p, mean = p[rows], mean[rows]
            actual = cases.column(target)[rows]
            ok = success_vector(p, mean, actual, tolerance)
            columns = {v.name: cases.column(v.name)[rows] for v in evidence_vars}
            columns[LABEL] = ok.astype(np.int64)
            minutes = cases.minutes[rows] if cases.minutes is not None else None
            out.append(
                ReliabilityCases(
                    bottleneck=group.bottleneck,
                    kind=kind,
                    table=CaseTable(variables, columns, minutes=minutes),
                    p_present=p,
                    mean_minutes=mean,
                    actual_minutes=actual,
                )
            )
    return out


@dataclass
class ReliabilityEntry:
    """One trained (or degenerate) classifier plus its holdout report."""

    bottleneck: str
    kind: str
    net: BayesNet | None  # None when the labels were single-class
    constant: float | None  # P(success) reported by a degenerate model
    accuracy: float  # held-out classification accuracy
    base_success_rate: float  # base-model success fraction on the holdout
    n_cases: int
    n_holdout: int

    @property
    def degenerate(self) -> bool:
        return self.net is None

    def p_success(self, evidence: dict, n_samples: int = 2000, seed: int = 0) -> float:
        if self.net is None:
            return float(self.constant)
        posterior = discrete_posterior(self.net, evidence, LABEL, n_samples=n_samples, seed=seed)
        return float(posterior[1])

    def to_dict(self) -> dict:
        return {
            "bottleneck": self.bottleneck,
            "kind": self.kind,
            "degenerate": self.degenerate,
            "constant": self.constant,
            "accuracy": self.accuracy,
            "base_success_rate": self.base_success_rate,
            "n_cases": self.n_cases,
            "n_holdout": self.n_holdout,
            "net": None if self.net is None else self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReliabilityEntry":
        return cls(
            bottleneck=d["bottleneck"],
            kind=d["kind"],
            net=None if d["net"] is None else BayesNet.from_dict(d["net"]),
            constant=d["constant"],
            accuracy=d["accuracy"],
            base_success_rate=d["base_success_rate"],
            n_cases=d["n_cases"],
            n_holdout=d["n_holdout"],
        )


def _train_entry(rc: ReliabilityCases, seed: int, max_parents: int) -> ReliabilityEntry:
    labels = rc.labels
    classes = np.unique(labels)
    if rc.table.n_rows < 8 or classes.size < 2:
        # Too little data, or the base model never (or always) missed
        # here: fall back to a constant report rather than failing.
        rate = float(labels.mean()) if labels.size else 1.0
        constant = float(classes[0]) if classes.size == 1 else rate
        accuracy = max(rate, 1.0 - rate) if labels.size else 1.0
        return ReliabilityEntry(
            bottleneck=rc.bottleneck,
            kind=rc.kind,
            net=None,
            constant=constant,
            accuracy=accuracy,
            base_success_rate=rate,
            n_cases=int(labels.size),
            n_holdout=0,
        )
    fit, holdout = sequential_split(rc.table, HOLDOUT_FRACTION)
    config = SearchConfig(
        max_parents=max_parents,
        restarts=1,
        allow_reversals=False,
        target_sinks=True,
        seed=seed,
    )
    net = structure_search(fit.variables, fit, config)
    # Holdout rows are complete, so each prediction is an exact leaf lookup.
    cpd = net.cpds[LABEL]
    predicted = np.empty(holdout.n_rows, dtype=np.int64)
    for leaf, rows in cpd.leaf_rows(holdout):
        if rows.size:
            predicted[rows] = int(np.argmax(leaf.probs()))
    truth = holdout.column(LABEL)
    return ReliabilityEntry(
        bottleneck=rc.bottleneck,
        kind=rc.kind,
        net=net,
        constant=None,
        accuracy=float((predicted == truth).mean()),
        base_success_rate=float(truth.mean()),
        n_cases=rc.table.n_rows,
        n_holdout=holdout.n_rows,
    )


@dataclass
class ReliabilityModel:
    """All per-(bottleneck, kind) classifiers plus the flag threshold."""

    entries: dict[tuple[str, str], ReliabilityEntry]
    threshold: float = FLAG_THRESHOLD
    tolerance: float = DEFAULT_TOLERANCE_MIN

    def covers(self, bottleneck: str, kind: str) -> bool:
        return (bottleneck, kind) in self.entries

    def entry(self, bottleneck: str, kind: str) -> ReliabilityEntry:
        key = (bottleneck, kind)
        if key not in self.entries:
            raise KeyError(f"no reliability model for {bottleneck}/{kind}")
        return self.entries[key]

    def p_success(self, bottleneck: str, kind: str, evidence: dict, seed: int = 0) -> float:
        return self.entry(bottleneck, kind).p_success(evidence, seed=seed)

    def to_dict(self) -> dict:
        keys = sorted(self.entries)
        return {
            "schema_version": SCHEMA_VERSION,
            "threshold": self.threshold,
            "tolerance": self.tolerance,
            "entries": [self.entries[k].to_dict() for k in keys],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReliabilityModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported reliability schema {d.get('schema_version')!r}")
        entries = {}
        for entry_dict in d["entries"]:
            entry = ReliabilityEntry.from_dict(entry_dict)
            entries[(entry.bottleneck, entry.kind)] = entry
        return cls(entries=entries, threshold=d["threshold"], tolerance=d["tolerance"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ReliabilityModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_reliability(
    labeled: list[ReliabilityCases],
    threshold: float = FLAG_THRESHOLD,
    tolerance: float = DEFAULT_TOLERANCE_MIN,
    seed: int = 0,
    max_parents: int = MAX_PARENTS,
) -> ReliabilityModel:
    """Fit one classifier per labeled (bottleneck, kind) pair."""
    if not labeled:
        raise ValueError("no labeled reliability cases")
    entries = {}
    for rc in sorted(labeled, key=lambda rc: (rc.bottleneck, rc.kind)):
        entries[(rc.bottleneck, rc.kind)] = _train_entry(rc, seed, max_parents)
    return ReliabilityModel(entries=entries, threshold=threshold, tolerance=tolerance)


def annotate(
    forecast: Forecast, model: ReliabilityModel, evidence: dict, seed: int = 0
) -> Forecast:
    """Set the forecast's reliability flag from P(success | observations)."""
    bottleneck, _, _ = forecast.target.rpartition("_time_to_")
    kind = _kind_of_target(forecast.target)
    p = model.p_success(bottleneck, kind, evidence, seed=seed)
    return dataclasses.replace(forecast, reliability_flag=bool(p < model.threshold))
