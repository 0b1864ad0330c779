"""Run results and the shared iteration-log schema."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

LOG_COLUMNS = ("iter", "time_s", "phase", "g_curr", "g_best", "step", "cuts", "status")


class RunStatus(Enum):
    EPS_LOCAL_OPTIMAL = "eps-local-optimal"
    ITERATION_LIMIT = "iteration-limit"
    PATTERN_CAP_EXCEEDED = "pattern-cap-exceeded"
    STALLED = "stalled"
    FIXED_POINT = "fixed-point"


@dataclass(frozen=True)
class IterationRow:
    iter: int
    time_s: float
    phase: str
    g_curr: float
    g_best: float
    step: float
    cuts: int
    status: str = ""

    def as_csv(self) -> list[str]:
        return [
            str(self.iter),
            repr(self.time_s),
            self.phase,
            repr(self.g_curr),
            repr(self.g_best),
            repr(self.step),
            str(self.cuts),
            self.status,
        ]


@dataclass(frozen=True)
class RegionReport:
    """One dual-phase examination of a neighbor region."""

    active: frozenset[int]
    bound: float
    descent: float | None
    certified: bool
    iteration: int


@dataclass(frozen=True, eq=False)
class RunResult:
    x: np.ndarray
    value: float
    status: RunStatus
    iterations: tuple[IterationRow, ...]
    warnings: tuple[str, ...] = ()
    certified: tuple[frozenset[int], ...] = ()
    region_reports: tuple[RegionReport, ...] = field(default=())

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)


def write_log_csv(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def read_log_csv(path: str | Path) -> list[IterationRow]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            out.append(
                IterationRow(
                    iter=int(rec["iter"]),
                    time_s=float(rec["time_s"]),
                    phase=rec["phase"],
                    g_curr=float(rec["g_curr"]),
                    g_best=float(rec["g_best"]),
                    step=float(rec["step"]),
                    cuts=int(rec["cuts"]),
                    status=rec["status"],
                )
            )
    return out


def best_so_far_at(rows, t: float) -> float:
    """Best value reached by wall time t; the final value once the run has ended."""
    best = None
    for row in rows:
        if row.time_s <= t or best is None:
            best = row.g_best
    return best
