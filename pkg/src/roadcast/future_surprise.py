"""Predicting surprises a fixed lead time ahead, and the FN/FP trade-off.

A future-surprise case is an ordinary case (observations at time t,
plus whether each bottleneck is surprising right now) labeled by the
marginal model's verdict exactly ``lead`` minutes later.  States are
judged at 15-minute-slot granularity: the "current" state at t is the
last slot that completed at or before t, so every feature is causal,
and the label reads the slot containing t + lead.

One classifier per bottleneck is trained on the first 75% of the
cases; the rest drive the FN/FP curve, which sweeps an alert threshold
over predicted surprise probability after dropping cases where the
bottleneck is already surprising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bn.infer import discrete_posterior
from .bn.model import BayesNet
from .bn.schema import CaseTable, Variable, sequential_split
from .bn.search import SearchConfig, structure_search
from .bottlenecks import Bottleneck
from .cases import build_cases, case_variables
from .sim import MINUTES_PER_DAY, SLOT_MIN, SLOTS_PER_DAY, WEATHER_LEVELS, SimOutput
from .surprise import (
    SURPRISE_THRESHOLD,
    MarginalModel,
    SlotState,
    slot_jam_states,
    surprise_now,
)

__all__ = [
    "LEAD_MIN",
    "FnFpCurve",
    "FutureSurpriseModel",
    "build_surprise_cases",
    "train_future_surprise",
    "fnfp_curve",
    "operating_point",
    "fnfp_csv",
]

LEAD_MIN = 30
MAX_PARENTS = 4
HOLDOUT_FRACTION = 0.75
SCHEMA_VERSION = 1

TAG_SUFFIX = "_surprise_now"
LABEL_SUFFIX = "_future_surprise"


def surprise_case_variables(bottlenecks: list[Bottleneck]) -> list[Variable]:
    """Full case schema plus current-tag evidence and future labels."""
    variables = list(case_variables(bottlenecks))
    names = sorted(b.name for b in bottlenecks)
    for name in names:
        variables.append(Variable(f"{name}{TAG_SUFFIX}", "discrete", arity=2))
    for name in names:
        variables.append(Variable(f"{name}{LABEL_SUFFIX}", "discrete", arity=2, role="target"))
    return variables


def slot_surprise_verdicts(
    stream: SimOutput,
    bottlenecks: list[Bottleneck],
    model: MarginalModel,
    threshold: float = SURPRISE_THRESHOLD,
) -> dict[str, np.ndarray]:
    """Per bottleneck: one boolean per slot, true when the slot is surprising."""
    n_slots = len(stream.context)
    start_dow = stream.start.weekday()
    out: dict[str, np.ndarray] = {}
    for b in sorted(bottlenecks, key=lambda b: b.name):
        jammed = slot_jam_states(stream, b)
        verdicts = np.zeros(n_slots, dtype=bool)
        for s in range(n_slots):
            rec = stream.context[s]
            minute = s * SLOT_MIN
            state = SlotState(
                bottleneck=b.name,
                minute=minute,
                jammed=bool(jammed[s]),
                day_of_week=(start_dow + minute // MINUTES_PER_DAY) % 7,
                slot_of_day=s % SLOTS_PER_DAY,
                weather=rec.weather,
                holiday=rec.holiday,
            )
            verdicts[s] = surprise_now(state, model, threshold) is not None
        out[b.name] = verdicts
    return out


def build_surprise_cases(
    stream: SimOutput,
    bottlenecks: list[Bottleneck],
    marginal: MarginalModel,
    lead: int = LEAD_MIN,
    sample_interval: int = 15,
    feature_window: int = 30,
    threshold: float = SURPRISE_THRESHOLD,
) -> CaseTable:
    """Sample cases whose labels are the surprise verdict at t + lead."""
    if lead <= 0:
        raise ValueError("lead must be positive")
    base = build_cases(stream, bottlenecks, sample_interval, feature_window)
    minutes = base.minutes
    keep = minutes + lead <= stream.n_minutes - 1
    if not keep.any():
        raise ValueError("lead exceeds the stream span")
    base = base.select(keep)
    minutes = base.minutes

    # Causality: features in `base` consult minutes <= t (trailing
    # windows), and the tag slot is the last one that completed by t.
    # Only the label looks ahead, to the slot containing t + lead.
    tag_slots = minutes // SLOT_MIN - 1
    label_slots = (minutes + lead) // SLOT_MIN
    if tag_slots.min() < 0:
        raise ValueError("cases start before the first completed slot")
    if np.any((tag_slots + 1) * SLOT_MIN - 1 >= minutes + 1):
        raise AssertionError("current-surprise tags would read past the case timestamp")

    verdicts = slot_surprise_verdicts(stream, bottlenecks, marginal, threshold)
    columns = {name: base.columns[name] for name in base.columns}
    names = sorted(b.name for b in bottlenecks)
    for name in names:
        columns[f"{name}{TAG_SUFFIX}"] = verdicts[name][tag_slots].astype(np.int64)
    for name in names:
        columns[f"{name}{LABEL_SUFFIX}"] = verdicts[name][label_slots].astype(np.int64)
    return CaseTable(surprise_case_variables(bottlenecks), columns, minutes=minutes)


@dataclass
class FutureSurpriseEntry:
    """One bottleneck's classifier (or constant fallback) and base rate."""

    bottleneck: str
    net: BayesNet | None
    constant: float | None  # P(surprise) when degenerate
    base_rate: float  # label frequency in the training slice
    n_train: int

    @property
    def degenerate(self) -> bool:
        return self.net is None

    def p_surprise(self, evidence: dict, n_samples: int = 5000, seed: int = 0) -> float:
        if self.net is None:
            return float(self.constant)
        label = f"{self.bottleneck}{LABEL_SUFFIX}"
        posterior = discrete_posterior(self.net, evidence, label, n_samples=n_samples, seed=seed)
        return float(posterior[1])

    def to_dict(self) -> dict:
        return {
            "bottleneck": self.bottleneck,
            "degenerate": self.degenerate,
            "constant": self.constant,
            "base_rate": self.base_rate,
            "n_train": self.n_train,
            "net": None if self.net is None else self.net.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FutureSurpriseEntry":
        return cls(
            bottleneck=d["bottleneck"],
            net=None if d["net"] is None else BayesNet.from_dict(d["net"]),
            constant=d["constant"],
            base_rate=d["base_rate"],
            n_train=d["n_train"],
        )


@dataclass
class FutureSurpriseModel:
    entries: dict[str, FutureSurpriseEntry]
    lead: int = LEAD_MIN
    threshold: float = SURPRISE_THRESHOLD  # current-surprise tagging threshold

    def entry(self, bottleneck: str) -> FutureSurpriseEntry:
        if bottleneck not in self.entries:
            raise KeyError(f"no future-surprise model for {bottleneck!r}")
        return self.entries[bottleneck]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "lead": self.lead,
            "threshold": self.threshold,
            "entries": [self.entries[k].to_dict() for k in sorted(self.entries)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FutureSurpriseModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported future-surprise schema {d.get('schema_version')!r}")
        entries = {e["bottleneck"]: FutureSurpriseEntry.from_dict(e) for e in d["entries"]}
        return cls(entries=entries, lead=d["lead"], threshold=d["threshold"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "FutureSurpriseModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _entry_for(
    table: CaseTable, bottleneck: str, seed: int, max_parents: int
) -> FutureSurpriseEntry:
    label = f"{bottleneck}{LABEL_SUFFIX}"
    labels = table.column(label)
    base_rate = float(labels.mean()) if labels.size else 0.0
    if np.unique(labels).size < 2:
        return FutureSurpriseEntry(
            bottleneck=bottleneck,
            net=None,
            constant=base_rate,
            base_rate=base_rate,
            n_train=int(labels.size),
        )
    variables = [v for v in table.variables if v.role == "evidence"]
    variables.append(table.variable(label))
    columns = {v.name: table.column(v.name) for v in variables}
    sub = CaseTable(variables, columns, minutes=table.minutes)
    config = SearchConfig(
        max_parents=max_parents,
        restarts=1,
        allow_reversals=False,
        target_sinks=True,
        seed=seed,
    )
    net = structure_search(sub.variables, sub, config)
    return FutureSurpriseEntry(
        bottleneck=bottleneck,
        net=net,
        constant=None,
        base_rate=base_rate,
        n_train=table.n_rows,
    )


def train_future_surprise(
    train_table: CaseTable,
    lead: int = LEAD_MIN,
    threshold: float = SURPRISE_THRESHOLD,
    seed: int = 0,
    max_parents: int = MAX_PARENTS,
) -> FutureSurpriseModel:
    """Fit one surprise classifier per bottleneck on the training slice."""
    names = sorted(
        v.name[: -len(LABEL_SUFFIX)] for v in train_table.variables if v.name.endswith(LABEL_SUFFIX)
    )
    if not names:
        raise ValueError("table has no future-surprise label columns")
    entries = {name: _entry_for(train_table, name, seed, max_parents) for name in names}
    return FutureSurpriseModel(entries=entries, lead=lead, threshold=threshold)


@dataclass
class FnFpCurve:
    """Threshold sweep for one bottleneck; undefined without any surprise."""

    bottleneck: str
    points: list[tuple[float, float, float]]  # (threshold, fn, fp)
    defined: bool
    reason: str = ""
    n_surprise: int = 0
    n_quiet: int = 0


def _row_p_surprise(entry: FutureSurpriseEntry, table: CaseTable) -> np.ndarray:
    """Exact P(surprise) per row: full rows pin every tree path."""
    if entry.net is None:
        return np.full(table.n_rows, float(entry.constant))
    label = f"{entry.bottleneck}{LABEL_SUFFIX}"
    cpd = entry.net.cpds[label]
    out = np.empty(table.n_rows)
    for leaf, rows in cpd.leaf_rows(table):
        if rows.size:
            out[rows] = leaf.probs()[1]
    return out


def _sweep(p: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, fn, fp) points at 0, every distinct prediction, and 1."""
    n_surprise = int(labels.sum())
    n_quiet = int((~labels).sum())
    points = []
    for thr in sorted({0.0, 1.0, *(float(x) for x in p)}):
        alert = p >= thr
        fn = float((~alert & labels).sum() / n_surprise)
        fp = float((alert & ~labels).sum() / n_quiet) if n_quiet else 0.0
        points.append((thr, fn, fp))
    return points


def fnfp_curve(model: FutureSurpriseModel, test_table: CaseTable, bottleneck: str) -> FnFpCurve:
    """Sweep the alert threshold on cases not currently surprising."""
    entry = model.entry(bottleneck)
    calm = test_table.column(f"{bottleneck}{TAG_SUFFIX}") == 0
    table = test_table.select(calm)
    labels = table.column(f"{bottleneck}{LABEL_SUFFIX}") == 1
    n_surprise = int(labels.sum())
    n_quiet = int((~labels).sum())
    if n_surprise == 0:
        return FnFpCurve(
            bottleneck=bottleneck,
            points=[],
            defined=False,
            reason="no actual surprises in the test cases",
            n_surprise=0,
            n_quiet=n_quiet,
        )
    return FnFpCurve(
        bottleneck=bottleneck,
        points=_sweep(_row_p_surprise(entry, table), labels),
        defined=True,
        n_surprise=n_surprise,
        n_quiet=n_quiet,
    )


def operating_point(curve: FnFpCurve, max_fn: float = 0.5) -> tuple[float, float, float] | None:
    """The largest-threshold point still reporting enough surprises.

    FN grows with the threshold, so this picks the point with the
    lowest false-positive rate among those with FN <= max_fn.
    """
    if not curve.defined:
        return None
    best = None
    for thr, fn, fp in curve.points:
        if fn <= max_fn and (best is None or thr > best[0]):
            best = (thr, fn, fp)
    return best


def fnfp_csv(curves: list[FnFpCurve]) -> str:
    """Defined curves as stable CSV rows, one per swept threshold."""
    lines = ["bottleneck,threshold,fn,fp"]
    for curve in sorted(curves, key=lambda c: c.bottleneck):
        if not curve.defined:
            continue
        for thr, fn, fp in curve.points:
            lines.append("%s,%.6f,%.6f,%.6f" % (curve.bottleneck, thr, fn, fp))
    return "\n".join(lines) + "\n"
