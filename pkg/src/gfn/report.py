"""Comparison reports and their CSV/JSON serialization.

Floats are written with 17 significant digits, which round-trips every double.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

COMPARISON_COLUMNS = ("label", "value", "std_err", "analytic", "z", "pass")


def fmt(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    mc_mean: float
    mc_std_err: float
    analytic_value: float
    z_score: float
    passed: bool
    snap_error: float = 0.0

    def csv_row(self) -> list:
        return [self.label, self.mc_mean, self.mc_std_err, self.analytic_value, self.z_score, self.passed]


@dataclass
class ComparisonReport:
    gate: float
    rows: list[ComparisonRow] = field(default_factory=list)

    def add(self, label: str, mean: float, std_err: float, analytic: float, snap_error: float = 0.0) -> ComparisonRow:
        mean, std_err, analytic = float(mean), float(std_err), float(analytic)
        if std_err > 0:
            z = (mean - analytic) / std_err
        else:
            z = 0.0 if mean == analytic else math.copysign(math.inf, mean - analytic)
        row = ComparisonRow(label, mean, std_err, analytic, z, bool(abs(z) <= self.gate), float(snap_error))
        self.rows.append(row)
        return row

    @property
    def n_pass(self) -> int:
        return sum(r.passed for r in self.rows)

    @property
    def n_fail(self) -> int:
        return len(self.rows) - self.n_pass

    @property
    def worst_z(self) -> float:
        return max((abs(r.z_score) for r in self.rows), default=0.0)

    def summary(self) -> dict:
        return {"n_pass": self.n_pass, "n_fail": self.n_fail, "worst_z": self.worst_z, "gate": self.gate}


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_summary(path, command: str, version: str, config_echo: dict, rows: list[dict], summary: dict) -> Path:
    path = Path(path)
    doc = {"command": command, "version": version, "config": config_echo, "rows": rows, "summary": summary}
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path
