"""Forecast evaluation: the tolerance rule and per-bottleneck accuracy.

A forecast succeeds against ground truth as follows:

* predicted no-event (presence probability < 0.5): success iff the
  event did not occur within the horizon;
* predicted ">=60": success iff the event took more than 60 minutes
  (including not occurring at all within the horizon);
* otherwise numeric: success iff the event occurred and the actual
  time is within the tolerance (default 15 minutes) of the predicted
  mean.

This single rule is shared by accuracy reporting and by reliability
labeling, so the two can never drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BayesNet
from .schema import CaseTable
from .tree import GaussianLeaf

DEFAULT_TOLERANCE_MIN = 15.0


def prediction_success(
    p_present: float,
    mean_minutes: float,
    actual_minutes: float,
    tolerance: float = DEFAULT_TOLERANCE_MIN,
) -> bool:
    """Apply the success rule to one forecast; actual NaN means no event."""
    actual_present = not np.isnan(actual_minutes)
    if p_present < 0.5:
        return not actual_present
    if mean_minutes >= 60.0:
        return (not actual_present) or actual_minutes > 60.0
    return actual_present and abs(mean_minutes - actual_minutes) <= tolerance


def success_vector(
    p_present: np.ndarray,
    mean_minutes: np.ndarray,
    actual_minutes: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE_MIN,
) -> np.ndarray:
    """Vectorized prediction_success over aligned arrays."""
    actual_present = ~np.isnan(actual_minutes)
    no_event = p_present < 0.5
    ge60 = ~no_event & (mean_minutes >= 60.0)
    numeric = ~no_event & ~ge60
    with np.errstate(invalid="ignore"):
        return (
            (no_event & ~actual_present)
            | (ge60 & (~actual_present | (actual_minutes > 60.0)))
            | (numeric & actual_present & (np.abs(mean_minutes - actual_minutes) <= tolerance))
        )


def row_forecast_params(
    net: BayesNet, table: CaseTable, target: str
) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-row (p_present, mean) for a continuous target.

    Case rows are complete (absence is a value), so every row pins its
    full tree path and the leaf lookup is exact.
    """
    cpd = net.cpds[target]
    center, scale = net.standardization.get(target, (0.0, 1.0))
    p = np.empty(table.n_rows)
    mean = np.empty(table.n_rows)
    for leaf, rows in cpd.leaf_rows(table):
        if rows.size == 0:
            continue
        if not isinstance(leaf, GaussianLeaf):
            raise ValueError(f"{target} does not have binary-Gaussian leaves")
        p[rows] = leaf.p_present()
        mean[rows] = leaf.posterior.predictive_mean() * scale + center
    return p, mean


@dataclass(frozen=True)
class EvalGroup:
    """One bottleneck's evaluation wiring inside a case table."""

    bottleneck: str
    state_var: str  # discrete: 1 = currently jammed
    clear_target: str  # time-to-clear, asked when jammed
    jam_target: str  # time-to-jam, asked when open


def evaluate_forecasts(
    net: BayesNet,
    table: CaseTable,
    groups: list[EvalGroup],
    tolerance: float = DEFAULT_TOLERANCE_MIN,
) -> list[dict]:
    """Per-bottleneck success fractions for clear and jam forecasts."""
    if table.n_rows == 0:
        raise ValueError("empty test set")
    out = []
    for group in groups:
        jammed = table.column(group.state_var) == 1
        row = {"bottleneck": group.bottleneck}
        for key, target, mask in (
            ("clear", group.clear_target, jammed),
            ("jam", group.jam_target, ~jammed),
        ):
            n = int(mask.sum())
            row[f"n_{key}"] = n
            if n == 0:
                row[f"{key}_acc"] = float("nan")
                continue
            p, mean = row_forecast_params(net, table, target)
            ok = success_vector(p[mask], mean[mask], table.column(target)[mask], tolerance)
            row[f"{key}_acc"] = float(ok.mean())
        out.append(row)
    return out


def accuracy_csv(rows: list[dict]) -> str:
    """Render evaluation rows as a stable, diffable CSV."""
    lines = ["bottleneck,clear_acc,jam_acc,n_clear,n_jam"]
    for row in sorted(rows, key=lambda r: r["bottleneck"]):
        lines.append(
            "%s,%.6f,%.6f,%d,%d"
            % (row["bottleneck"], row["clear_acc"], row["jam_acc"], row["n_clear"], row["n_jam"])
        )
    return "\n".join(lines) + "\n"
