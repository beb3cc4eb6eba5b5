"""Named stream configurations.

Each preset builds a complete SimConfig for a different traffic
regime.  They share the same eight-region corridor network but differ
in rush-hour strength, weather, incident load, and cross-region
propagation, so each exercises a different part of the pipeline:

* ``standard_stream``   - realistic mixed conditions for forecasting.
* ``rainstorm_stream``  - frequent heavy rain with storm chaos, so
  forecast quality collapses in bad weather.
* ``stationary_stream`` - long, dry, repeatable weeks for calibrating
  how often each slot state actually occurs.
* ``propagation_stream``- quiet downstream regions that jam 45 minutes
  after upstream incidents.
"""

from __future__ import annotations

from .network import RoadNetwork, chain_network
from .sim import DayProfile, PropagationRule, RegionSchedule, SimConfig

__all__ = [
    "standard_stream",
    "rainstorm_stream",
    "stationary_stream",
    "propagation_stream",
    "PRESETS",
    "preset_config",
]


def _rush_profile(
    am: tuple[str, str, float] | None,
    pm: tuple[str, str, float] | None,
    base: float,
    ramp: int = 0,
) -> DayProfile:
    segments = [seg for seg in (am, pm) if seg is not None]
    return DayProfile(segments=segments, base=base, ramp_slots=ramp)


def _standard_schedules(network: RoadNetwork) -> dict[str, RegionSchedule]:
    names = [r.name for r in network.regions]
    # Per-region rush shapes; strengths vary so the regions span a range
    # of difficulty instead of all behaving identically.
    weekday_shapes = [
        (("07:00", "09:00", 0.90), ("16:00", "18:30", 0.88), 0.020, 0),
        (("06:45", "09:00", 0.86), ("15:45", "18:30", 0.90), 0.030, 0),
        (("07:15", "09:15", 0.92), ("16:15", "18:45", 0.85), 0.015, 0),
        (("07:00", "08:45", 0.82), ("16:00", "18:00", 0.86), 0.025, 1),
        (("06:30", "08:30", 0.88), ("15:30", "18:00", 0.84), 0.020, 0),
        (("07:30", "09:00", 0.78), ("16:30", "18:30", 0.80), 0.030, 1),
        (("07:00", "09:00", 0.85), ("16:00", "18:15", 0.87), 0.020, 0),
        (("07:45", "09:15", 0.74), ("16:45", "18:45", 0.76), 0.035, 1),
    ]
    weekend_shapes = [
        _rush_profile(None, ("12:00", "15:00", 0.18), 0.020),
        _rush_profile(None, None, 0.030),
        _rush_profile(None, ("13:00", "16:00", 0.22), 0.020),
        _rush_profile(None, None, 0.025),
        _rush_profile(None, None, 0.020),
        _rush_profile(None, ("11:00", "14:00", 0.15), 0.030),
        _rush_profile(None, None, 0.020),
        _rush_profile(None, None, 0.030),
    ]
    schedules = {}
    for name, (am, pm, base, ramp), weekend in zip(names, weekday_shapes, weekend_shapes):
        schedules[name] = RegionSchedule(
            weekday=_rush_profile(am, pm, base, ramp), weekend=weekend
        )
    return schedules


def standard_stream(days: int = 90, seed: int = 0) -> SimConfig:
    """Mixed-conditions corridor: strong rushes, mild weather, incidents."""
    network = chain_network()
    names = [r.name for r in network.regions]
    return SimConfig(
        network=network,
        days=days,
        seed=seed,
        schedules=_standard_schedules(network),
        persistence=0.85,
        weather_probs={"dry": 0.72, "rain": 0.20, "heavy_rain": 0.08},
        weather_boost={"dry": 0.0, "rain": 0.05, "heavy_rain": 0.12},
        holidays=[14, 42],  # the two Monday holidays inside a 90-day window
        school_breaks=[(44, 49)],
        incident_rate_per_day={name: 0.25 for name in names},
        event_rate_per_week=0.5,
        event_region=names[2],
        event_boost=0.35,
    )


def rainstorm_stream(days: int = 60, seed: int = 0) -> SimConfig:
    """Storm season: heavy rain is common and scrambles jam patterns."""
    config = standard_stream(days=days, seed=seed)
    config.weather_probs = {"dry": 0.35, "rain": 0.25, "heavy_rain": 0.40}
    config.weather_boost = {"dry": 0.0, "rain": 0.05, "heavy_rain": 0.10}
    config.weather_mean_slots = 24
    config.storm_flip_prob = 0.55
    config.holidays = []
    config.school_breaks = []
    return config


def stationary_stream(weeks: int = 26, seed: int = 0) -> SimConfig:
    """Dry, holiday-free weeks with one fixed weekly pattern."""
    network = chain_network()
    return SimConfig(
        network=network,
        days=weeks * 7,
        seed=seed,
        schedules=_standard_schedules(network),
        persistence=0.85,
        weather_probs={"dry": 1.0, "rain": 0.0, "heavy_rain": 0.0},
        weather_boost={"dry": 0.0, "rain": 0.0, "heavy_rain": 0.0},
    )


# Upstream regions whose incidents echo downstream 45 minutes later.
PROPAGATION_PAIRS = ((0, 1), (3, 4))


def propagation_stream(weeks: int = 52, seed: int = 0) -> SimConfig:
    """Quiet targets that jam well after upstream incidents.

    The lag (45 min) comfortably exceeds the incident-report window, so
    a watcher that reads the log has time to see trouble coming.
    """
    network = chain_network()
    names = [r.name for r in network.regions]
    schedules: dict[str, RegionSchedule] = {}
    sources = {names[i] for i, _ in PROPAGATION_PAIRS}
    targets = {names[j] for _, j in PROPAGATION_PAIRS}
    for name in names:
        if name in targets:
            # A solid morning rush keeps the region on the identification
            # map without making off-peak jams expected.
            weekday = DayProfile(segments=[("07:00", "09:30", 0.65)], base=0.008)
        elif name in sources:
            weekday = DayProfile(segments=[("07:00", "09:00", 0.55)], base=0.015)
        else:
            weekday = DayProfile(segments=[("07:00", "09:00", 0.60), ("16:00", "18:00", 0.60)], base=0.02)
        schedules[name] = RegionSchedule(weekday=weekday, weekend=DayProfile(base=0.01))
    return SimConfig(
        network=network,
        days=weeks * 7,
        seed=seed,
        schedules=schedules,
        persistence=0.80,
        weather_probs={"dry": 1.0, "rain": 0.0, "heavy_rain": 0.0},
        weather_boost={"dry": 0.0, "rain": 0.0, "heavy_rain": 0.0},
        incident_rate_per_day={names[i]: 1.2 for i, _ in PROPAGATION_PAIRS},
        propagation=[
            PropagationRule(source=names[i], target=names[j], lag_min=45, effect=0.6, window_min=10)
            for i, j in PROPAGATION_PAIRS
        ],
    )


PRESETS = {
    "standard": standard_stream,
    "rainstorm": rainstorm_stream,
    "stationary": stationary_stream,
    "propagation": propagation_stream,
}


def preset_config(name: str, seed: int = 0, **kwargs) -> SimConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](seed=seed, **kwargs)
