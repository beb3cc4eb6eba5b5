"""Seeded traffic stream generator.

Produces minute-resolution speed readings for every cell of a road
network, slot-resolution context records (weather, temperature,
holiday, school, special events), and an operator-style incident log.
All randomness flows from a single seed through named child streams,
so runs are reproducible and an injected incident perturbs only the
minutes and cells it plausibly touches (paired-run comparisons stay
valid).

The generative story, per region:

* a base jam propensity per (day-of-week, 15-min slot) from a schedule,
* additive context shifts (weather, special events) and incident
  forcing, clipped to [0, 1] per minute,
* a latent AR(1) Gaussian state per slot mapped through the normal CDF
  to a uniform, so the per-minute jam probability is hit exactly while
  jams persist across neighboring slots,
* optional storm chaos: during heavy rain a slot's jam state may be
  replaced by a fair coin flip,
* blockage spreading upstream from the region's downstream cell with a
  per-cell onset delay, clearing with a shorter per-cell release delay,
* speeds of roughly 12 mph on blocked cells and 60 mph otherwise,
  plus white noise drawn once per (cell, minute).
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .incidents import IncidentEvent, format_incident
from .network import RoadNetwork

SLOT_MIN = 15
SLOTS_PER_DAY = 96
MINUTES_PER_DAY = 1440
WEATHER_LEVELS = ("dry", "rain", "heavy_rain")

# Fixed stream start: Monday 2025-01-06 00:00 UTC.
DEFAULT_START = dt.datetime(2025, 1, 6, tzinfo=dt.timezone.utc)

_OPERATORS = ("Nick", "Dana", "Ray", "Priya", "Mel")


class SimConfigError(ValueError):
    """Raised for contradictory or out-of-range stream settings."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class DayProfile:
    """Base jam propensity over one day.

    ``segments`` are ("HH:MM", "HH:MM", probability) half-open spans on
    the 15-minute grid; later segments win on overlap.  ``ramp_slots``
    smooths the step profile with a centered moving average so onsets
    build over a slot or two instead of snapping.
    """

    segments: list[tuple[str, str, float]] = field(default_factory=list)
    base: float = 0.02
    ramp_slots: int = 0

    def expand(self) -> np.ndarray:
        out = np.full(SLOTS_PER_DAY, self.base, dtype=float)
        for start, end, p in self.segments:
            if not 0.0 <= p <= 1.0:
                raise SimConfigError(f"segment probability {p} outside [0, 1]")
            a, b = _slot_of(start), _slot_of(end)
            if not 0 <= a < b <= SLOTS_PER_DAY:
                raise SimConfigError(f"bad segment span {start}-{end}")
            out[a:b] = p
        if self.ramp_slots > 0:
            width = 2 * self.ramp_slots + 1
            padded = np.pad(out, self.ramp_slots, mode="edge")
            out = np.convolve(padded, np.ones(width) / width, mode="valid")
        return out


def _slot_of(hhmm: str) -> int:
    hour, minute = hhmm.split(":")
    total = int(hour) * 60 + int(minute)
    if total % SLOT_MIN:
        raise SimConfigError(f"{hhmm} is not on the {SLOT_MIN}-minute grid")
    return total // SLOT_MIN


@dataclass
class RegionSchedule:
    weekday: DayProfile = field(default_factory=DayProfile)
    weekend: DayProfile = field(default_factory=DayProfile)

    def table(self) -> np.ndarray:
        wd, we = self.weekday.expand(), self.weekend.expand()
        return np.stack([wd, wd, wd, wd, wd, we, we])


@dataclass
class IncidentSpec:
    """A scheduled incident: region, start minute, and how long it holds."""

    region: str
    minute: int
    duration_min: int = 45
    kind: str = "accident"


@dataclass
class PropagationRule:
    """Incidents in ``source`` shift jam odds in ``target`` after a lag.

    The shift applies over minutes [lag - window, lag + window] relative
    to the incident start and may be negative.
    """

    source: str
    target: str
    lag_min: int = 30
    effect: float = 0.5
    window_min: int = 10


@dataclass
class EventSpec:
    """A scheduled special event boosting one region's jam odds."""

    day: int
    start_slot: int
    end_slot: int
    region: str
    name: str = "GAME"
    boost: float = 0.3


@dataclass
class SimConfig:
    network: RoadNetwork
    days: int
    seed: int = 0
    start: dt.datetime = DEFAULT_START
    schedules: dict[str, RegionSchedule] = field(default_factory=dict)
    default_schedule: RegionSchedule = field(default_factory=RegionSchedule)
    persistence: float = 0.85
    weather_probs: dict[str, float] = field(
        default_factory=lambda: {"dry": 0.72, "rain": 0.2, "heavy_rain": 0.08}
    )
    weather_boost: dict[str, float] = field(
        default_factory=lambda: {"dry": 0.0, "rain": 0.06, "heavy_rain": 0.14}
    )
    weather_mean_slots: int = 16
    storm_flip_prob: float = 0.0
    holidays: list[int] = field(default_factory=list)
    school_breaks: list[tuple[int, int]] = field(default_factory=list)
    events: list[EventSpec] = field(default_factory=list)
    event_rate_per_week: float = 0.0
    event_region: str | None = None
    event_boost: float = 0.3
    incidents: list[IncidentSpec] = field(default_factory=list)
    incident_rate_per_day: dict[str, float] = field(default_factory=dict)
    incident_local_boost: float = 3.0
    propagation: list[PropagationRule] = field(default_factory=list)
    spread_min_per_cell: int = 2
    clear_min_per_cell: int = 1
    jam_speed_mph: float = 12.0
    free_speed_mph: float = 60.0
    jam_noise_mph: float = 4.0
    free_noise_mph: float = 5.0

    def validate(self) -> None:
        if self.days <= 0:
            raise SimConfigError("stream must span at least one day")
        if not 0.0 <= self.persistence < 1.0:
            raise SimConfigError("persistence must lie in [0, 1)")
        names = {r.name for r in self.network.regions}
        for name in self.schedules:
            if name not in names:
                raise SimConfigError(f"schedule for unknown region {name!r}")
        for spec in self.incidents:
            if spec.region not in names:
                raise SimConfigError(f"incident in unknown region {spec.region!r}")
            if not 0 <= spec.minute < self.days * MINUTES_PER_DAY:
                raise SimConfigError(f"incident minute {spec.minute} outside stream")
        for name in self.incident_rate_per_day:
            if name not in names:
                raise SimConfigError(f"incident rate for unknown region {name!r}")
        for rule in self.propagation:
            if rule.source not in names or rule.target not in names:
                raise SimConfigError("propagation rule names unknown region")
        for ev in self.events:
            if ev.region not in names:
                raise SimConfigError(f"event in unknown region {ev.region!r}")
        if abs(sum(self.weather_probs.get(w, 0.0) for w in WEATHER_LEVELS) - 1.0) > 1e-9:
            raise SimConfigError("weather probabilities must sum to 1")
        if not 0.0 <= self.storm_flip_prob <= 1.0:
            raise SimConfigError("storm_flip_prob must lie in [0, 1]")

    def schedule_for(self, region: str) -> RegionSchedule:
        return self.schedules.get(region, self.default_schedule)


def inject_incident(
    config: SimConfig,
    region: str,
    minute: int,
    kind: str = "accident",
    duration_min: int = 45,
) -> SimConfig:
    """Return a copy of ``config`` with one extra scheduled incident."""
    names = {r.name for r in config.network.regions}
    if region not in names:
        raise SimConfigError(f"unknown region {region!r}")
    if not 0 <= minute < config.days * MINUTES_PER_DAY:
        raise SimConfigError(f"minute {minute} outside the stream span")
    spec = IncidentSpec(region=region, minute=minute, duration_min=duration_min, kind=kind)
    return dataclasses.replace(config, incidents=list(config.incidents) + [spec])


# ---------------------------------------------------------------------------
# outputs


@dataclass
class ContextRecord:
    minute: int
    weather: str
    temperature_f: float
    holiday: bool
    school_in_session: bool
    major_event: str


@dataclass
class IncidentRecord:
    region: str
    start_minute: int
    duration_min: int
    kind: str
    text: str


@dataclass
class SimOutput:
    config: SimConfig
    network: RoadNetwork
    start: dt.datetime
    n_minutes: int
    cells: list[str]
    speeds: np.ndarray  # [n_cells, n_minutes]
    jam_drive: np.ndarray  # [n_regions, n_minutes] bool, region order as network
    context: list[ContextRecord]  # one per 15-minute slot
    incidents: list[IncidentRecord]
    incident_log: str

    def minute_timestamps(self) -> np.ndarray:
        base = np.datetime64(self.start.replace(tzinfo=None), "m")
        return base + np.arange(self.n_minutes, dtype="timedelta64[m]")

    def readings_frame(self) -> pd.DataFrame:
        stamps = self.minute_timestamps()
        n_cells = len(self.cells)
        return pd.DataFrame(
            {
                "timestamp": np.tile(stamps, n_cells),
                "cell_id": np.repeat(np.array(self.cells, dtype=object), self.n_minutes),
                "speed_mph": self.speeds.reshape(-1),
            }
        )

    def context_frame(self) -> pd.DataFrame:
        base = np.datetime64(self.start.replace(tzinfo=None), "m")
        return pd.DataFrame(
            {
                "timestamp": [base + np.timedelta64(c.minute, "m") for c in self.context],
                "weather": [c.weather for c in self.context],
                "temperature_f": [c.temperature_f for c in self.context],
                "holiday": [c.holiday for c in self.context],
                "school_in_session": [c.school_in_session for c in self.context],
                "major_event": [c.major_event for c in self.context],
            }
        )


# ---------------------------------------------------------------------------
# generation


def _trailing_all(flags: np.ndarray, window: int) -> np.ndarray:
    """True where ``flags`` has been True for the last ``window``+1 minutes."""
    if window <= 0:
        return flags.copy()
    idx = np.arange(flags.size)
    last_false = np.maximum.accumulate(np.where(~flags, idx, -1))
    return flags & (idx - last_false > window)


def _trailing_any(flags: np.ndarray, window: int) -> np.ndarray:
    """True within ``window`` minutes after any True in ``flags``."""
    if window <= 0:
        return flags.copy()
    idx = np.arange(flags.size)
    last_true = np.maximum.accumulate(np.where(flags, idx, -(flags.size + 1)))
    return idx - last_true <= window


def _sample_weather(rng: np.random.Generator, n_slots: int, config: SimConfig) -> np.ndarray:
    probs = np.array([config.weather_probs[w] for w in WEATHER_LEVELS])
    out = np.empty(n_slots, dtype=np.int64)
    filled = 0
    while filled < n_slots:
        state = rng.choice(len(WEATHER_LEVELS), p=probs)
        span = int(rng.geometric(1.0 / config.weather_mean_slots))
        out[filled : filled + span] = state
        filled += span
    return out


def _sample_incidents(rng: np.random.Generator, config: SimConfig) -> list[IncidentSpec]:
    specs = list(config.incidents)
    for region in sorted(config.incident_rate_per_day):
        rate = config.incident_rate_per_day[region]
        count = int(rng.poisson(rate * config.days))
        if count == 0:
            continue
        # Daytime incidents only: operators are watching 06:00-20:00.
        days = rng.integers(0, config.days, size=count)
        offsets = rng.integers(6 * 60, 20 * 60, size=count)
        durations = rng.integers(25, 70, size=count)
        kinds = np.where(rng.random(count) < 0.8, "accident", "blocking")
        for day, off, dur, kind in zip(days, offsets, durations, kinds):
            specs.append(
                IncidentSpec(
                    region=region,
                    minute=int(day) * MINUTES_PER_DAY + int(off),
                    duration_min=int(dur),
                    kind=str(kind),
                )
            )
    specs.sort(key=lambda s: (s.minute, s.region))
    return specs


def _sample_events(rng: np.random.Generator, config: SimConfig) -> list[EventSpec]:
    events = list(config.events)
    if config.event_rate_per_week > 0:
        weeks = max(1, config.days // 7)
        count = int(rng.poisson(config.event_rate_per_week * weeks))
        region_names = [r.name for r in config.network.regions]
        for _ in range(count):
            day = int(rng.integers(0, config.days))
            start = int(rng.integers(70, 78))  # evening kickoff
            region = config.event_region or region_names[int(rng.integers(0, len(region_names)))]
            events.append(
                EventSpec(
                    day=day,
                    start_slot=start,
                    end_slot=min(start + 12, SLOTS_PER_DAY),
                    region=region,
                    boost=config.event_boost,
                )
            )
    events.sort(key=lambda e: (e.day, e.start_slot, e.region))
    return events


def _incident_event(
    rng: np.random.Generator, spec: IncidentSpec, config: SimConfig, start: dt.datetime
) -> IncidentEvent:
    region = config.network.region_by_name(spec.region)
    reported = start + dt.timedelta(minutes=spec.minute)
    cleared = start + dt.timedelta(minutes=spec.minute + spec.duration_min)
    lanes = ["RL", "LL", "CL"][: int(rng.integers(1, 3))]
    responders = ["WSP"] + (["FIR"] if spec.kind == "accident" and rng.random() < 0.6 else [])
    return IncidentEvent(
        raw="",
        kind=spec.kind if spec.kind in ("accident", "blocking") else "other",
        operator=_OPERATORS[int(rng.integers(0, len(_OPERATORS)))],
        road=region.road,
        direction=region.direction,
        landmark=region.landmark or None,
        lanes=lanes,
        responders=responders,
        reported=dt.time(reported.hour, reported.minute),
        cleared=dt.time(cleared.hour, cleared.minute),
    )


def simulate(config: SimConfig) -> SimOutput:
    """Run the generator and return the full stream."""
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(8)
    rng_weather = np.random.default_rng(seeds[0])
    rng_temp = np.random.default_rng(seeds[1])
    rng_latent = np.random.default_rng(seeds[2])
    rng_noise = np.random.default_rng(seeds[3])
    rng_incident = np.random.default_rng(seeds[4])
    rng_event = np.random.default_rng(seeds[5])
    rng_storm = np.random.default_rng(seeds[6])
    rng_text = np.random.default_rng(seeds[7])

    n_minutes = config.days * MINUTES_PER_DAY
    n_slots = config.days * SLOTS_PER_DAY
    regions = config.network.regions
    n_regions = len(regions)
    start_dow = config.start.weekday()

    # --- context -----------------------------------------------------------
    weather_idx = _sample_weather(rng_weather, n_slots, config)
    slot_minutes = np.arange(n_slots) * SLOT_MIN
    slot_day = slot_minutes // MINUTES_PER_DAY
    slot_of_day = (slot_minutes % MINUTES_PER_DAY) // SLOT_MIN

    day_index = np.arange(config.days)
    holiday_set = set(config.holidays)
    is_holiday_day = np.array([d in holiday_set for d in day_index])
    dow_of_day = (start_dow + day_index) % 7
    in_break = np.zeros(config.days, dtype=bool)
    for lo, hi in config.school_breaks:
        in_break[max(0, lo) : min(config.days, hi)] = True
    school_day = (dow_of_day < 5) & ~is_holiday_day & ~in_break

    day_of_year = (config.start.timetuple().tm_yday - 1 + day_index) % 365
    seasonal = 45.0 + 15.0 * np.sin(2 * np.pi * (day_of_year - 105) / 365.0)
    diurnal = 8.0 * np.sin(2 * np.pi * (slot_minutes % MINUTES_PER_DAY - 540) / MINUTES_PER_DAY)
    temp = (
        seasonal[slot_day]
        + diurnal
        + rng_temp.normal(0.0, 2.0, size=n_slots)
        - np.array([0.0, 4.0, 7.0])[weather_idx]
    )

    events = _sample_events(rng_event, config)
    event_name_slot = np.full(n_slots, "", dtype=object)
    region_row = {r.name: i for i, r in enumerate(regions)}
    event_boost_min = np.zeros((n_regions, n_minutes))
    for ev in events:
        lo = ev.day * SLOTS_PER_DAY + ev.start_slot
        hi = min(ev.day * SLOTS_PER_DAY + ev.end_slot, n_slots)
        if lo >= n_slots:
            continue
        event_name_slot[lo:hi] = ev.name
        event_boost_min[region_row[ev.region], lo * SLOT_MIN : hi * SLOT_MIN] += ev.boost

    # --- per-minute jam propensity -----------------------------------------
    minute_idx = np.arange(n_minutes)
    minute_day = minute_idx // MINUTES_PER_DAY
    minute_slot_of_day = (minute_idx % MINUTES_PER_DAY) // SLOT_MIN
    eff_dow = np.where(is_holiday_day, 6, dow_of_day)  # holidays run the Sunday profile

    boost_by_weather = np.array([config.weather_boost.get(w, 0.0) for w in WEATHER_LEVELS])
    weather_boost_min = boost_by_weather[weather_idx][minute_idx // SLOT_MIN]

    p_eff = np.empty((n_regions, n_minutes))
    for i, region in enumerate(regions):
        table = config.schedule_for(region.name).table()
        p_eff[i] = table[eff_dow[minute_day], minute_slot_of_day]
    p_eff += weather_boost_min[None, :]
    p_eff += event_boost_min

    incidents = _sample_incidents(rng_incident, config)
    for spec in incidents:
        row = region_row[spec.region]
        lo, hi = spec.minute, min(spec.minute + spec.duration_min, n_minutes)
        p_eff[row, lo:hi] += config.incident_local_boost
        for rule in config.propagation:
            if rule.source != spec.region:
                continue
            center = spec.minute + rule.lag_min
            wlo = max(0, center - rule.window_min)
            whi = min(n_minutes, center + rule.window_min + 1)
            p_eff[region_row[rule.target], wlo:whi] += rule.effect
    np.clip(p_eff, 0.0, 1.0, out=p_eff)

    # --- latent state and jam drive -----------------------------------------
    phi = config.persistence
    shocks = rng_latent.standard_normal((n_regions, n_slots))
    z = np.empty_like(shocks)
    z[:, 0] = shocks[:, 0]
    scale = np.sqrt(1.0 - phi * phi)
    for s in range(1, n_slots):
        z[:, s] = phi * z[:, s - 1] + scale * shocks[:, s]
    u_slot = ndtr(z)

    jam = u_slot[:, minute_idx // SLOT_MIN] < p_eff

    if config.storm_flip_prob > 0.0:
        flips = rng_storm.random((n_regions, n_slots)) < config.storm_flip_prob
        coins = rng_storm.random((n_regions, n_slots)) < 0.5
        heavy = weather_idx == WEATHER_LEVELS.index("heavy_rain")
        flip_min = (flips & heavy[None, :])[:, minute_idx // SLOT_MIN]
        coin_min = coins[:, minute_idx // SLOT_MIN]
        jam = np.where(flip_min, coin_min, jam)

    # --- blockage spread and speeds -----------------------------------------
    cell_row = {c: i for i, c in enumerate(config.network.cells)}
    blocked = np.zeros((len(config.network.cells), n_minutes), dtype=bool)
    for i, region in enumerate(regions):
        drive = jam[i]
        # The jam seeds at the downstream end and creeps up the chain.
        for k, cell in enumerate(reversed(region.cells)):
            on = _trailing_all(drive, config.spread_min_per_cell * k)
            blocked[cell_row[cell]] = _trailing_any(on, config.clear_min_per_cell * k)

    noise = rng_noise.standard_normal(blocked.shape)
    speeds = np.where(
        blocked,
        config.jam_speed_mph + config.jam_noise_mph * noise,
        config.free_speed_mph + config.free_noise_mph * noise,
    )
    np.clip(speeds, 0.0, 75.0, out=speeds)

    # --- incident log --------------------------------------------------------
    records: list[IncidentRecord] = []
    blocks: list[str] = []
    for spec in incidents:
        text = format_incident(_incident_event(rng_text, spec, config, config.start))
        records.append(
            IncidentRecord(
                region=spec.region,
                start_minute=spec.minute,
                duration_min=spec.duration_min,
                kind=spec.kind,
                text=text,
            )
        )
        blocks.append(text)

    context = [
        ContextRecord(
            minute=int(slot_minutes[s]),
            weather=WEATHER_LEVELS[weather_idx[s]],
            temperature_f=round(float(temp[s]), 1),
            holiday=bool(is_holiday_day[slot_day[s]]),
            school_in_session=bool(school_day[slot_day[s]] and 6 <= slot_of_day[s] * SLOT_MIN // 60 < 16),
            major_event=str(event_name_slot[s]),
        )
        for s in range(n_slots)
    ]

    return SimOutput(
        config=config,
        network=config.network,
        start=config.start,
        n_minutes=n_minutes,
        cells=list(config.network.cells),
        speeds=speeds,
        jam_drive=jam,
        context=context,
        incidents=records,
        incident_log="\n\n".join(blocks),
    )
