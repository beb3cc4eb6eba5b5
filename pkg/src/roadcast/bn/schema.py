"""Variables and case tables.

A CaseTable is a columnar dataset over a fixed variable schema.
Discrete columns hold non-negative integer codes; continuous columns
hold floats with NaN meaning "absent" -- absence is a modeled outcome
(the event did not occur within the horizon), not missing data.
Discrete values are always present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # DISCRETE or CONTINUOUS
    arity: int = 0
    levels: tuple[str, ...] = ()
    role: str = "evidence"  # "evidence" or "target"

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == DISCRETE:
            if self.arity < 2:
                raise ValueError(f"{self.name}: discrete arity must be >= 2")
            if self.levels and len(self.levels) != self.arity:
                raise ValueError(f"{self.name}: levels do not match arity")
        if self.role not in ("evidence", "target"):
            raise ValueError(f"unknown role {self.role!r}")

    def level_name(self, code: int) -> str:
        return self.levels[code] if self.levels else str(code)

    def code_of(self, value) -> int:
        if isinstance(value, str):
            if value not in self.levels:
                raise ValueError(f"{self.name}: unknown level {value!r}")
            return self.levels.index(value)
        code = int(value)
        if code != value:  # reject fractional codes instead of truncating
            raise ValueError(f"{self.name}: discrete value must be a code or level name, got {value!r}")
        if not 0 <= code < self.arity:
            raise ValueError(f"{self.name}: code {code} outside arity {self.arity}")
        return code

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "arity": self.arity,
            "levels": list(self.levels),
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Variable":
        return cls(
            name=d["name"],
            kind=d["kind"],
            arity=d.get("arity", 0),
            levels=tuple(d.get("levels", ())),
            role=d.get("role", "evidence"),
        )


class CaseTable:
    """Columnar cases over a schema, with optional row timestamps."""

    def __init__(
        self,
        variables: list[Variable],
        columns: dict[str, np.ndarray],
        minutes: np.ndarray | None = None,
    ):
        self.variables = list(variables)
        self.by_name = {v.name: v for v in self.variables}
        if len(self.by_name) != len(self.variables):
            raise ValueError("duplicate variable names")
        self.columns: dict[str, np.ndarray] = {}
        n_rows = None
        for var in self.variables:
            if var.name not in columns:
                raise ValueError(f"missing column {var.name!r}")
            col = np.asarray(columns[var.name])
            if var.kind == DISCRETE:
                col = col.astype(np.int64)
                if col.size and (col.min() < 0 or col.max() >= var.arity):
                    raise ValueError(f"{var.name}: codes outside [0, {var.arity})")
            else:
                col = col.astype(np.float64)
            if n_rows is None:
                n_rows = col.shape[0]
            elif col.shape[0] != n_rows:
                raise ValueError("ragged columns")
            self.columns[var.name] = col
        self.n_rows = n_rows or 0
        if minutes is not None:
            minutes = np.asarray(minutes, dtype=np.int64)
            if minutes.shape[0] != self.n_rows:
                raise ValueError("minutes do not align with rows")
        self.minutes = minutes

    def variable(self, name: str) -> Variable:
        return self.by_name[name]

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def present_mask(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if self.by_name[name].kind == DISCRETE:
            return np.ones(self.n_rows, dtype=bool)
        return ~np.isnan(col)

    def select(self, mask_or_index) -> "CaseTable":
        cols = {name: col[mask_or_index] for name, col in self.columns.items()}
        minutes = self.minutes[mask_or_index] if self.minutes is not None else None
        return CaseTable(self.variables, cols, minutes)

    def names(self, role: str | None = None) -> list[str]:
        return [v.name for v in self.variables if role is None or v.role == role]


def sequential_split(table: CaseTable, train_fraction: float = 0.75) -> tuple[CaseTable, CaseTable]:
    """Split by row order: first ceil(n * fraction) rows train, rest test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly inside (0, 1)")
    if table.n_rows < 2:
        raise ValueError("need at least two cases to split")
    n_train = math.ceil(table.n_rows * train_fraction)
    if n_train >= table.n_rows:
        raise ValueError("train_fraction leaves an empty test split")
    idx = np.arange(table.n_rows)
    return table.select(idx < n_train), table.select(idx >= n_train)


def decile_thresholds(values: np.ndarray) -> tuple[float, ...]:
    """Interior decile cut points of the present (non-NaN) values.

    These are the only thresholds the tree search may test on a
    continuous parent, so they are computed once from training data.
    """
    present = np.asarray(values, dtype=float)
    present = present[~np.isnan(present)]
    if present.size < 2:
        return ()
    qs = np.quantile(present, np.linspace(0.1, 0.9, 9))
    out: list[float] = []
    for q in qs:
        q = float(q)
        if not out or q > out[-1]:
            out.append(q)
    # A threshold at or below the minimum splits nothing; drop it.
    lo = float(present.min())
    return tuple(q for q in out if q > lo)


def continuous_standardization(values: np.ndarray) -> tuple[float, float]:
    """Training mean/std of present values (std floored at a small eps)."""
    present = np.asarray(values, dtype=float)
    present = present[~np.isnan(present)]
    if present.size == 0:
        return 0.0, 1.0
    mean = float(present.mean())
    std = float(present.std())
    if std < 1e-9:
        std = 1.0
    return mean, std
