"""Glue from a case table to a trained forecasting net and accuracy table.

The forecasting net treats the two time-to-event columns per
bottleneck as targets and everything else as evidence.  Targets are
sinks: nothing downstream ever conditions on them, so the structure
search reduces to picking each target's parents independently, which
keeps training fast enough to rerun from scratch.

Evaluation follows the sequential protocol: the case table is split
75/25 by time, the net is scored on the held-out quarter with the
15-minute tolerance rule, and the per-bottleneck results land in
accuracy.csv.
"""

from __future__ import annotations

from .bn.evaluate import DEFAULT_TOLERANCE_MIN, EvalGroup, accuracy_csv, evaluate_forecasts
from .bn.infer import DEFAULT_SAMPLES, Forecast, predict
from .bn.model import BayesNet
from .bn.schema import CaseTable, Variable
from .bn.search import SearchConfig, structure_search
from .cases import split_sequential

__all__ = [
    "TRAIN_FRACTION",
    "bottleneck_names",
    "eval_groups",
    "train_forecast_net",
    "evaluate_table",
    "evaluation_rows",
    "row_evidence",
    "forecast_bottleneck",
    "accuracy_csv",
]

TRAIN_FRACTION = 0.75
# Parent budget for the traffic net.  Wide enough for a slot/day shape
# plus a handful of speed features; small enough that a full retrain
# stays in the minutes range.
MAX_PARENTS = 5

_STATE_SUFFIX = "_jammed"


def bottleneck_names(variables: list[Variable]) -> list[str]:
    """Bottleneck ids present in a case schema, by their state columns."""
    return sorted(
        v.name[: -len(_STATE_SUFFIX)] for v in variables if v.name.endswith(_STATE_SUFFIX)
    )


def eval_groups(names: list[str]) -> list[EvalGroup]:
    return [
        EvalGroup(
            bottleneck=name,
            state_var=f"{name}{_STATE_SUFFIX}",
            clear_target=f"{name}_time_to_clear",
            jam_target=f"{name}_time_to_jam",
        )
        for name in sorted(names)
    ]


def train_forecast_net(
    table: CaseTable,
    seed: int = 0,
    max_parents: int = MAX_PARENTS,
    restarts: int = 1,
) -> BayesNet:
    """Learn the forecasting net (targets as sinks) from a case table.

    A single climb from the empty graph suffices here: with sink-only
    edges the score decomposes per target, so random restarts mostly
    re-find the same parent sets at several times the cost.
    """
    config = SearchConfig(
        max_parents=max_parents,
        restarts=restarts,
        allow_reversals=False,
        target_sinks=True,
        seed=seed,
    )
    return structure_search(table.variables, table, config)


def evaluation_rows(
    net: BayesNet, test: CaseTable, tolerance: float = DEFAULT_TOLERANCE_MIN
) -> list[dict]:
    """Per-bottleneck clear/jam accuracy on an already-split test table."""
    groups = eval_groups(bottleneck_names(test.variables))
    if not groups:
        raise ValueError("case table has no bottleneck state columns")
    return evaluate_forecasts(net, test, groups, tolerance)


def evaluate_table(
    net: BayesNet, table: CaseTable, tolerance: float = DEFAULT_TOLERANCE_MIN
) -> list[dict]:
    """Split a full case table 75/25 by time and score the final quarter."""
    _, test = split_sequential(table, TRAIN_FRACTION)
    return evaluation_rows(net, test, tolerance)


def row_evidence(table: CaseTable, index: int) -> dict:
    """One row's observed (non-target) values, keyed by variable name."""
    if not 0 <= index < table.n_rows:
        raise IndexError(f"row {index} out of range for {table.n_rows} cases")
    out = {}
    for var in table.variables:
        if var.role != "evidence":
            continue
        value = table.columns[var.name][index]
        out[var.name] = int(value) if var.kind == "discrete" else float(value)
    return out


def forecast_bottleneck(
    net: BayesNet,
    evidence: dict,
    bottleneck: str,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> Forecast:
    """Forecast the event that applies now: clearing if jammed, else jamming."""
    state_var = f"{bottleneck}{_STATE_SUFFIX}"
    if state_var not in evidence:
        raise ValueError(f"evidence must include {state_var} to pick the target")
    jammed = bool(evidence[state_var])
    target = f"{bottleneck}_time_to_clear" if jammed else f"{bottleneck}_time_to_jam"
    return predict(net, evidence, target, n_samples=n_samples, seed=seed)
