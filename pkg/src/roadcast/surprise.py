"""Commuter-expectation marginals and current-surprise tagging.

The marginal model counts how often each bottleneck is jammed versus
open per (day-of-week, 15-minute slot, weather, holiday) bucket.  A
current state is surprising when its Laplace-smoothed likelihood under
that bucket is at or below the threshold (default 0.10): a jam where
flow is expected tags ``surprising_jam``, free flow where a jam is
expected tags ``surprising_flow``.

Thin buckets are never trusted: below the minimum support the lookup
backs off by dropping weather, then holiday, bottoming out at the
plain (day-of-week, slot) bucket.  Back-off only ever coarsens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bottlenecks import Bottleneck, jam_series
from .sim import MINUTES_PER_DAY, SLOT_MIN, SLOTS_PER_DAY, WEATHER_LEVELS, SimOutput

__all__ = [
    "SURPRISE_THRESHOLD",
    "PSEUDO_COUNT",
    "MIN_SUPPORT",
    "SlotState",
    "SurpriseTag",
    "MarginalModel",
    "fit_marginal",
    "surprise_now",
    "scan_surprises",
    "slot_jam_states",
    "slot_states",
]

SURPRISE_THRESHOLD = 0.10
PSEUDO_COUNT = 1.0
MIN_SUPPORT = 25
SCHEMA_VERSION = 1

# Back-off ladder, coarsest last.  Each name keys how the bucket was
# collapsed before the likelihood was computed.
BUCKET_FULL = "full"
BUCKET_NO_WEATHER = "no_weather"
BUCKET_DOW_SLOT = "dow_slot"

_WEATHER_CODE = {name: i for i, name in enumerate(WEATHER_LEVELS)}


@dataclass(frozen=True)
class SlotState:
    """One bottleneck's observed state plus its bucket coordinates."""

    bottleneck: str
    minute: int
    jammed: bool
    day_of_week: int
    slot_of_day: int
    weather: str
    holiday: bool


@dataclass(frozen=True)
class SurpriseTag:
    bottleneck: str
    minute: int
    observed: str  # "jammed" or "open"
    likelihood: float
    direction: str  # "surprising_jam" or "surprising_flow"
    bucket: str  # back-off level the likelihood came from

    def to_dict(self) -> dict:
        return {
            "bottleneck": self.bottleneck,
            "minute": self.minute,
            "observed": self.observed,
            "likelihood": round(self.likelihood, 6),
            "direction": self.direction,
            "bucket": self.bucket,
        }


class MarginalModel:
    """Per-bottleneck jam/open counts over context buckets.

    ``counts[b][dow, slot, weather, holiday, state]`` holds raw
    observation counts (state 1 = jammed); smoothing happens at query
    time so the stored model stays a plain tally.
    """

    def __init__(
        self,
        counts: dict[str, np.ndarray],
        pseudo: float = PSEUDO_COUNT,
        min_support: int = MIN_SUPPORT,
    ):
        shape = (7, SLOTS_PER_DAY, len(WEATHER_LEVELS), 2, 2)
        for name, arr in counts.items():
            if arr.shape != shape:
                raise ValueError(f"{name}: counts must have shape {shape}")
        self.counts = counts
        self.pseudo = float(pseudo)
        self.min_support = int(min_support)

    def bottlenecks(self) -> list[str]:
        return sorted(self.counts)

    def bucket_counts(self, state: SlotState) -> tuple[np.ndarray, str]:
        """The (open, jam) counts backing this state's likelihood.

        Returns the finest bucket meeting the support floor, together
        with the back-off level name.
        """
        if state.bottleneck not in self.counts:
            raise KeyError(f"unknown bottleneck {state.bottleneck!r}")
        table = self.counts[state.bottleneck]
        dow, slot = state.day_of_week, state.slot_of_day
        weather = _WEATHER_CODE[state.weather]
        holiday = int(state.holiday)
        full = table[dow, slot, weather, holiday]
        if full.sum() >= self.min_support:
            return full, BUCKET_FULL
        no_weather = table[dow, slot, :, holiday].sum(axis=0)
        if no_weather.sum() >= self.min_support:
            return no_weather, BUCKET_NO_WEATHER
        return table[dow, slot].sum(axis=(0, 1)), BUCKET_DOW_SLOT

    def likelihood(self, state: SlotState) -> tuple[float, str]:
        """Smoothed probability of the observed state, plus bucket level."""
        counts, bucket = self.bucket_counts(state)
        total = counts.sum() + 2.0 * self.pseudo
        p_jam = (counts[1] + self.pseudo) / total
        return (float(p_jam) if state.jammed else float(1.0 - p_jam)), bucket

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "pseudo": self.pseudo,
            "min_support": self.min_support,
            "weather_levels": list(WEATHER_LEVELS),
            "counts": {name: self.counts[name].tolist() for name in sorted(self.counts)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported marginal schema {d.get('schema_version')!r}")
        counts = {name: np.asarray(arr, dtype=np.int64) for name, arr in d["counts"].items()}
        return cls(counts, pseudo=d["pseudo"], min_support=d["min_support"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "MarginalModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def slot_jam_states(stream: SimOutput, bottleneck: Bottleneck) -> np.ndarray:
    """One boolean per slot: was the bottleneck jammed most of the slot."""
    jam = jam_series(stream.speeds, stream.cells, bottleneck)
    per_slot = jam.reshape(-1, SLOT_MIN).sum(axis=1)
    return per_slot * 2 > SLOT_MIN


def slot_states(
    stream: SimOutput, bottlenecks: list[Bottleneck], slots: np.ndarray | None = None
) -> list[SlotState]:
    """Observed SlotStates for each bottleneck at each slot of a stream."""
    n_slots = len(stream.context)
    if slots is None:
        slots = np.arange(n_slots)
    start_dow = stream.start.weekday()
    states: list[SlotState] = []
    for b in sorted(bottlenecks, key=lambda b: b.name):
        jammed = slot_jam_states(stream, b)
        for s in slots:
            rec = stream.context[s]
            minute = int(s) * SLOT_MIN
            states.append(
                SlotState(
                    bottleneck=b.name,
                    minute=minute,
                    jammed=bool(jammed[s]),
                    day_of_week=(start_dow + minute // MINUTES_PER_DAY) % 7,
                    slot_of_day=int(s) % SLOTS_PER_DAY,
                    weather=rec.weather,
                    holiday=rec.holiday,
                )
            )
    return states


def fit_marginal(
    stream: SimOutput,
    bottlenecks: list[Bottleneck],
    pseudo: float = PSEUDO_COUNT,
    min_support: int = MIN_SUPPORT,
) -> MarginalModel:
    """Tally per-slot jam states over at least one full week of history."""
    if stream.n_minutes < 7 * MINUTES_PER_DAY:
        raise ValueError("marginal model needs at least one full week of history")
    if not bottlenecks:
        raise ValueError("no bottlenecks to model")
    shape = (7, SLOTS_PER_DAY, len(WEATHER_LEVELS), 2, 2)
    counts: dict[str, np.ndarray] = {}
    n_slots = len(stream.context)
    start_dow = stream.start.weekday()
    slot_idx = np.arange(n_slots)
    dow = (start_dow + slot_idx * SLOT_MIN // MINUTES_PER_DAY) % 7
    slot_of_day = slot_idx % SLOTS_PER_DAY
    weather = np.array([_WEATHER_CODE[rec.weather] for rec in stream.context])
    holiday = np.array([int(rec.holiday) for rec in stream.context])
    for b in sorted(bottlenecks, key=lambda b: b.name):
        jammed = slot_jam_states(stream, b).astype(np.int64)
        flat = np.ravel_multi_index((dow, slot_of_day, weather, holiday, jammed), shape)
        counts[b.name] = np.bincount(flat, minlength=np.prod(shape)).reshape(shape)
    return MarginalModel(counts, pseudo=pseudo, min_support=min_support)


def surprise_now(
    state: SlotState, model: MarginalModel, threshold: float = SURPRISE_THRESHOLD
) -> SurpriseTag | None:
    """Tag the state iff its marginal likelihood is at most the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly inside (0, 1)")
    likelihood, bucket = model.likelihood(state)
    if likelihood > threshold:
        return None
    return SurpriseTag(
        bottleneck=state.bottleneck,
        minute=state.minute,
        observed="jammed" if state.jammed else "open",
        likelihood=likelihood,
        direction="surprising_jam" if state.jammed else "surprising_flow",
        bucket=bucket,
    )


def scan_surprises(
    stream: SimOutput,
    bottlenecks: list[Bottleneck],
    model: MarginalModel,
    threshold: float = SURPRISE_THRESHOLD,
) -> list[SurpriseTag]:
    """All surprise tags over a stream, slot by slot, in time order."""
    tags = [
        tag
        for state in slot_states(stream, bottlenecks)
        if (tag := surprise_now(state, model, threshold)) is not None
    ]
    tags.sort(key=lambda t: (t.minute, t.bottleneck))
    return tags
