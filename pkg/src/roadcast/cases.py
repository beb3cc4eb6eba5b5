"""Case extraction: temporal abstractions, context, and censored targets.

Every ``sample_interval`` minutes (once enough history exists for the
trailing feature window and enough future for the censoring horizon) a
case records, per bottleneck:

* blocked cell count and the longest adjacent blocked run,
* minutes since the current block episode began (absent while open;
  an episode resets after 20 consecutive minutes of all-open flow),
* mean speed trend (mph/min) and band-change density over the window,
* whether an incident was reported in the region within the last 30
  minutes, and whether the bottleneck is currently jammed,
* censored targets: minutes until the jam clears / until one forms,
  absent when the event does not occur within 120 minutes.

plus shared context: day of week, 15-minute slot, holiday and school
flags, weather, temperature, and a major-event flag.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .bands import band_of
from .bn.schema import CaseTable, Variable, sequential_split
from .bottlenecks import Bottleneck, congested_matrix, jam_series
from .sim import MINUTES_PER_DAY, SLOT_MIN, WEATHER_LEVELS, SimOutput

FEATURE_WINDOW_MIN = 30
RESET_OPEN_MIN = 20
CENSOR_HORIZON_MIN = 120
SAMPLE_INTERVAL_MIN = 15
INCIDENT_FLAG_MIN = 30

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# per-timestamp reference implementation


class BottleneckFeatures:
    """Snapshot of one bottleneck at the end of a readings window."""

    def __init__(
        self,
        blocked_count: int,
        max_adjacent_blocked: int,
        minutes_since_block_start: float,
        velocity_change_rate: float,
        velocity_change_density: float,
        currently_jammed: bool,
    ):
        if max_adjacent_blocked > blocked_count:
            raise ValueError("adjacent run cannot exceed the blocked count")
        self.blocked_count = blocked_count
        self.max_adjacent_blocked = max_adjacent_blocked
        self.minutes_since_block_start = minutes_since_block_start
        self.velocity_change_rate = velocity_change_rate
        self.velocity_change_density = velocity_change_density
        self.currently_jammed = currently_jammed

    def __eq__(self, other):
        return isinstance(other, BottleneckFeatures) and self.__dict__ == other.__dict__

    def __repr__(self):
        return f"BottleneckFeatures({self.__dict__})"


def _max_run(flags: np.ndarray) -> int:
    best = run = 0
    for f in flags:
        run = run + 1 if f else 0
        best = max(best, run)
    return best


def extract_features(
    window_speeds: np.ndarray,
    window_min: int = FEATURE_WINDOW_MIN,
) -> BottleneckFeatures:
    """Features for one bottleneck from a [cells, minutes] history window.

    The window must cover at least ``window_min`` + 1 samples; the last
    sample is "now".  Minutes-since-block-start scans the whole provided
    history (clamping to its start if the episode began before it), so
    passing full history gives the exact value.
    """
    window_speeds = np.asarray(window_speeds, dtype=float)
    if window_speeds.ndim != 2:
        raise ValueError("expected a [cells, minutes] window")
    n_cells, n_min = window_speeds.shape
    if n_min < window_min + 1:
        raise ValueError(f"window must cover at least {window_min + 1} samples")

    cong = window_speeds < 30.0
    now = cong[:, -1]
    blocked_count = int(now.sum())
    max_adjacent = _max_run(now)
    jammed = now.mean() >= 0.5

    tail = window_speeds[:, -(window_min + 1) :]
    rate = float((tail[:, -1] - tail[:, 0]).mean() / window_min)
    bands = band_of(tail)
    density = float((np.abs(np.diff(bands, axis=1)).sum(axis=1) > 0).mean())

    minutes_since = float("nan")
    if jammed:
        any_blocked = cong.any(axis=0)
        start = 0
        open_run = 0
        armed = True  # stream start counts as reset
        for t in range(n_min):
            if any_blocked[t]:
                if armed:
                    start = t
                    armed = False
                open_run = 0
            else:
                open_run += 1
                if open_run >= RESET_OPEN_MIN:
                    armed = True
        minutes_since = float((n_min - 1) - start)

    return BottleneckFeatures(
        blocked_count=blocked_count,
        max_adjacent_blocked=max_adjacent,
        minutes_since_block_start=minutes_since,
        velocity_change_rate=rate,
        velocity_change_density=density,
        currently_jammed=jammed,
    )


# ---------------------------------------------------------------------------
# schema


def context_variables() -> list[Variable]:
    return [
        Variable("day_of_week", "discrete", arity=7),
        Variable("slot_of_day", "discrete", arity=MINUTES_PER_DAY // SLOT_MIN),
        Variable("holiday", "discrete", arity=2),
        Variable("school_in_session", "discrete", arity=2),
        Variable("weather", "discrete", arity=3, levels=WEATHER_LEVELS),
        Variable("temperature_f", "continuous"),
        Variable("major_event", "discrete", arity=2),
    ]


def bottleneck_variables(bottleneck: Bottleneck) -> list[Variable]:
    b = bottleneck.name
    n = len(bottleneck.cells)
    return [
        Variable(f"{b}_jammed", "discrete", arity=2),
        Variable(f"{b}_blocked_count", "discrete", arity=n + 1),
        Variable(f"{b}_max_adj_blocked", "discrete", arity=n + 1),
        Variable(f"{b}_jam_minutes", "continuous"),
        Variable(f"{b}_speed_trend", "continuous"),
        Variable(f"{b}_change_density", "continuous"),
        Variable(f"{b}_incident", "discrete", arity=2),
        Variable(f"{b}_time_to_clear", "continuous", role="target"),
        Variable(f"{b}_time_to_jam", "continuous", role="target"),
    ]


def case_variables(bottlenecks: list[Bottleneck]) -> list[Variable]:
    out = context_variables()
    for b in sorted(bottlenecks, key=lambda b: b.name):
        out.extend(bottleneck_variables(b))
    return out


# ---------------------------------------------------------------------------
# vectorized builders


def _block_start_minutes(any_blocked: np.ndarray) -> np.ndarray:
    """For each minute, the start minute of the current block episode.

    An episode opens at the first blocked minute after a completed
    reset (RESET_OPEN_MIN consecutive all-open minutes, or the stream
    start) and runs until the next reset completes.
    """
    n = any_blocked.size
    idx = np.arange(n)
    all_open = ~any_blocked
    # reset complete at t: the last RESET_OPEN_MIN minutes (incl. t) all open
    last_blocked = np.maximum.accumulate(np.where(any_blocked, idx, -1))
    reset_done = all_open & (idx - last_blocked >= RESET_OPEN_MIN)
    # episode opens where a block appears and the latest reset is more
    # recent than the latest earlier block
    last_reset = np.maximum.accumulate(np.where(reset_done, idx, -1))
    prev_blocked = np.concatenate([[-1], last_blocked[:-1]])
    prev_reset = np.concatenate([[-1], last_reset[:-1]])
    opens = any_blocked & (prev_reset > prev_blocked)
    if n and any_blocked[0]:
        opens[0] = True
    first = np.flatnonzero(any_blocked)
    if first.size and not opens[first[0]]:
        opens[first[0]] = True  # stream start counts as reset
    return np.maximum.accumulate(np.where(opens, idx, -1))


def _first_transition_within(flags: np.ndarray, value: bool, horizon: int) -> np.ndarray:
    """Minutes from t to the first minute > t with flags == value, NaN past horizon."""
    n = flags.size
    match = np.where(flags == value, np.arange(n, dtype=float), np.inf)
    nxt = np.minimum.accumulate(match[::-1])[::-1]  # next match at or after t
    after = np.full(n, np.nan)
    delta = nxt[1:] - np.arange(n - 1)  # first match strictly after t
    ok = np.isfinite(nxt[1:]) & (delta <= horizon)
    after[:-1][ok] = delta[ok]
    return after


def build_cases(
    stream: SimOutput,
    bottlenecks: list[Bottleneck],
    sample_interval: int = SAMPLE_INTERVAL_MIN,
    feature_window: int = FEATURE_WINDOW_MIN,
) -> CaseTable:
    """Sample the stream into a case table with censored targets."""
    if len(stream.context) * SLOT_MIN != stream.n_minutes:
        raise ValueError("context slots do not align with the readings span")
    if stream.speeds.shape != (len(stream.cells), stream.n_minutes):
        raise ValueError("speeds do not align with the cell list")
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")

    first = feature_window
    last = stream.n_minutes - CENSOR_HORIZON_MIN - 1
    if last < first:
        raise ValueError("stream too short for one case")
    sample_minutes = np.arange(first, last + 1, sample_interval)
    n = sample_minutes.size
    slot_idx = sample_minutes // SLOT_MIN

    columns: dict[str, np.ndarray] = {}

    # --- context -------------------------------------------------------------
    start_dow = stream.start.weekday()
    columns["day_of_week"] = (start_dow + sample_minutes // MINUTES_PER_DAY) % 7
    columns["slot_of_day"] = (sample_minutes % MINUTES_PER_DAY) // SLOT_MIN
    weather_code = {w: i for i, w in enumerate(WEATHER_LEVELS)}
    columns["weather"] = np.array([weather_code[stream.context[s].weather] for s in slot_idx])
    columns["holiday"] = np.array([int(stream.context[s].holiday) for s in slot_idx])
    columns["school_in_session"] = np.array(
        [int(stream.context[s].school_in_session) for s in slot_idx]
    )
    columns["temperature_f"] = np.array([stream.context[s].temperature_f for s in slot_idx])
    columns["major_event"] = np.array([int(bool(stream.context[s].major_event)) for s in slot_idx])

    # --- per-bottleneck ---------------------------------------------------------
    region_cells = {r.name: set(r.cells) for r in stream.network.regions}
    for b in sorted(bottlenecks, key=lambda b: b.name):
        cong = congested_matrix(stream.speeds, stream.cells, b)
        jam = jam_series(stream.speeds, stream.cells, b)
        rows = [stream.cells.index(c) for c in b.cells]
        speeds = stream.speeds[rows]

        columns[f"{b.name}_jammed"] = jam[sample_minutes].astype(np.int64)
        columns[f"{b.name}_blocked_count"] = cong[:, sample_minutes].sum(axis=0)
        run = np.zeros(stream.n_minutes)
        max_run = np.zeros(stream.n_minutes)
        for crow in cong:
            run = np.where(crow, run + 1, 0.0)
            np.maximum(max_run, run, out=max_run)
        columns[f"{b.name}_max_adj_blocked"] = max_run[sample_minutes].astype(np.int64)

        block_start = _block_start_minutes(cong.any(axis=0))
        jam_minutes = (sample_minutes - block_start[sample_minutes]).astype(float)
        jam_minutes[~jam[sample_minutes]] = np.nan
        columns[f"{b.name}_jam_minutes"] = jam_minutes

        trend = (speeds[:, sample_minutes] - speeds[:, sample_minutes - feature_window]).mean(
            axis=0
        ) / feature_window
        columns[f"{b.name}_speed_trend"] = trend

        bands = band_of(speeds)
        changed = np.concatenate(
            [np.zeros((len(rows), 1), dtype=np.int64), np.abs(np.diff(bands, axis=1)) > 0],
            axis=1,
        )
        csum = np.cumsum(changed, axis=1)
        in_window = csum[:, sample_minutes] - csum[:, sample_minutes - feature_window]
        columns[f"{b.name}_change_density"] = (in_window > 0).mean(axis=0)

        flag = np.zeros(stream.n_minutes, dtype=np.int64)
        for rec in stream.incidents:
            if region_cells[rec.region] & set(b.cells):
                flag[rec.start_minute : rec.start_minute + INCIDENT_FLAG_MIN + 1] = 1
        columns[f"{b.name}_incident"] = flag[sample_minutes]

        to_clear = _first_transition_within(jam, False, CENSOR_HORIZON_MIN)
        to_jam = _first_transition_within(jam, True, CENSOR_HORIZON_MIN)
        clear_col = to_clear[sample_minutes]
        clear_col[~jam[sample_minutes]] = np.nan
        jam_col = to_jam[sample_minutes]
        jam_col[jam[sample_minutes]] = np.nan
        columns[f"{b.name}_time_to_clear"] = clear_col
        columns[f"{b.name}_time_to_jam"] = jam_col

    return CaseTable(case_variables(bottlenecks), columns, minutes=sample_minutes)


def split_sequential(table: CaseTable, train_fraction: float = 0.75) -> tuple[CaseTable, CaseTable]:
    """Time-ordered split; see bn.schema.sequential_split."""
    return sequential_split(table, train_fraction)


# ---------------------------------------------------------------------------
# files


def save_cases(table: CaseTable, csv_path: str | Path, schema_path: str | Path | None = None) -> None:
    """Write cases.csv plus the JSON schema descriptor next to it."""
    csv_path = Path(csv_path)
    if schema_path is None:
        schema_path = csv_path.with_suffix(".schema.json")
    data = {"minute": table.minutes if table.minutes is not None else np.arange(table.n_rows)}
    for var in table.variables:
        data[var.name] = table.columns[var.name]
    pd.DataFrame(data).to_csv(csv_path, index=False, float_format="%.6f")
    schema = {
        "schema_version": SCHEMA_VERSION,
        "n_rows": table.n_rows,
        "variables": [v.to_dict() for v in table.variables],
    }
    Path(schema_path).write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")


def load_cases(csv_path: str | Path, schema_path: str | Path | None = None) -> CaseTable:
    csv_path = Path(csv_path)
    if schema_path is None:
        schema_path = csv_path.with_suffix(".schema.json")
    schema = json.loads(Path(schema_path).read_text())
    if schema.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported cases schema version {schema.get('schema_version')!r}")
    variables = [Variable.from_dict(d) for d in schema["variables"]]
    frame = pd.read_csv(csv_path)
    columns = {v.name: frame[v.name].to_numpy() for v in variables}
    minutes = frame["minute"].to_numpy() if "minute" in frame else None
    return CaseTable(variables, columns, minutes=minutes)
