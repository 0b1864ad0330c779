"""Benchmark harness: run (instance, approach) grids, score them, emit CSV artifacts."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ogo, pgd
from .errors import InvalidInputError, UndefinedMetricError
from .instances import (
    ProblemInstance,
    instance_from_dict,
    load_instance,
    make_random_instance,
    oracle_grid,
)
from .result import RunResult, best_so_far_at, write_log_csv

SUMMARY_COLUMNS = (
    "instance", "approach", "v0", "vfinal", "vstar",
    "pct_gap_closed", "abs_diff", "status", "iters", "log",
)


def percent_gap_closed(v0: float, vk: float, vstar: float) -> float:
    """(v0 - vk) / (v0 - vstar); 1 at the best known value, 0 with no progress."""
    if not v0 > vstar:
        raise UndefinedMetricError(
            f"initial value {v0} does not exceed best known {vstar}"
        )
    return (v0 - vk) / (v0 - vstar)


@dataclass(frozen=True)
class ApproachSpec:
    name: str
    algo: str  # "ogo" | "pgd"
    config: dict

    def __post_init__(self):
        if self.algo not in ("ogo", "pgd"):
            raise InvalidInputError(f"unknown algorithm {self.algo!r}")

    def build_config(self):
        if self.algo == "ogo":
            return ogo.OgoConfig.from_dict(self.config)
        return pgd.PgdConfig.from_dict(self.config)


@dataclass(frozen=True, eq=False)
class BenchRecord:
    instance: str
    approach: str
    v0: float
    vfinal: float
    vstar: float | None
    wall_time: float
    status: str
    iters: int
    log_path: str


def run_once(inst: ProblemInstance, approach: ApproachSpec, start_index: int = 0) -> RunResult:
    x0 = inst.starts[start_index]
    cfg = approach.build_config()
    if approach.algo == "ogo":
        return ogo.run(inst.net, inst.loss, inst.feasible, x0, cfg)
    return pgd.run(inst.net, inst.loss, inst.feasible, x0, cfg)


def _execute(task):
    inst, approach, start_index, log_path = task
    t0 = time.perf_counter()
    label = inst.name if inst.starts.shape[0] == 1 else f"{inst.name}#{start_index}"
    try:
        result = run_once(inst, approach, start_index)
    except Exception as exc:  # individual failures never abort the suite
        return BenchRecord(
            label, approach.name, np.nan, np.nan, None,
            time.perf_counter() - t0, f"error:{exc}", 0, "",
        ), None
    if log_path:
        write_log_csv(log_path, result.iterations)
    v0 = result.iterations[0].g_curr if result.iterations else result.value
    return BenchRecord(
        label, approach.name, float(v0), float(result.value), None,
        time.perf_counter() - t0, result.status.value,
        result.n_iterations, str(log_path or ""),
    ), result


def _load_suite_instances(spec: dict, base_dir: Path) -> list[ProblemInstance]:
    instances = []
    for i, entry in enumerate(spec.get("instances", [])):
        if isinstance(entry, str):
            inst = load_instance(base_dir / entry)
        elif "path" in entry:
            inst = load_instance(base_dir / entry["path"])
            if "id" in entry:
                inst = ProblemInstance(
                    inst.net, inst.target, inst.feasible, inst.starts,
                    name=entry["id"], seed=inst.seed,
                )
        elif "generate" in entry:
            gen = entry["generate"]
            inst = make_random_instance(
                gen["arch"],
                int(gen["seed"]),
                n_starts=int(gen.get("n_starts", 1)),
                normalize=bool(gen.get("normalize", True)),
                sample_count=int(gen.get("sample_count", 4096)),
            )
            if "id" in entry:
                inst = ProblemInstance(
                    inst.net, inst.target, inst.feasible, inst.starts,
                    name=entry["id"], seed=inst.seed,
                )
        elif "model" in entry or "target" in entry:
            inst = instance_from_dict(entry, base_dir=base_dir)
        else:
            raise InvalidInputError(f"suite instance {i} is neither a path nor inline data")
        instances.append(inst)
    if not instances:
        raise InvalidInputError("suite declares no instances")
    return instances


def run_suite(suite: dict | str | Path, out_dir: str | Path, jobs: int = 1):
    """Execute every (instance, start, approach) combination and write CSV outputs.

    Produces per-run iteration logs, summary.csv (deterministic for fixed seeds
    at jobs=1: no wall times), and profile.csv with mean metrics over time.
    """
    if not isinstance(suite, dict):
        suite_path = Path(suite)
        with open(suite_path) as fh:
            suite = json.load(fh)
        base_dir = suite_path.parent
    else:
        base_dir = Path(".")
    out_dir = Path(out_dir)
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)

    instances = _load_suite_instances(suite, base_dir)
    approaches = [
        ApproachSpec(a["name"], a["algo"], a.get("config", {}))
        for a in suite.get("approaches", [])
    ]
    if not approaches:
        raise InvalidInputError("suite declares no approaches")

    tasks = []
    for inst in instances:
        for s in range(inst.starts.shape[0]):
            label = inst.name if inst.starts.shape[0] == 1 else f"{inst.name}#{s}"
            for app in approaches:
                log_path = out_dir / "logs" / f"{label}__{app.name}.csv"
                tasks.append((inst, app, s, log_path))

    if jobs <= 1:
        outcomes = [_execute(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute, tasks))
    records = [rec for rec, _ in outcomes]
    results = {
        (rec.instance, rec.approach): res for rec, res in outcomes if res is not None
    }

    best: dict[str, float] = {}
    for rec in records:
        if np.isfinite(rec.vfinal):
            best[rec.instance] = min(best.get(rec.instance, np.inf), rec.vfinal)
    if suite.get("include_grid_oracle"):
        for inst in instances:
            if inst.net.input_dim <= 2:
                _, g_best, _ = oracle_grid(
                    inst.net, inst.loss, inst.feasible,
                    resolution=float(suite.get("grid_resolution", 1e-3)),
                )
                for s in range(inst.starts.shape[0]):
                    label = inst.name if inst.starts.shape[0] == 1 else f"{inst.name}#{s}"
                    best[label] = min(best.get(label, np.inf), g_best)

    records = [
        BenchRecord(
            rec.instance, rec.approach, rec.v0, rec.vfinal,
            best.get(rec.instance), rec.wall_time, rec.status, rec.iters, rec.log_path,
        )
        for rec in records
    ]
    _write_summary(records, out_dir / "summary.csv")
    _write_profile(records, results, out_dir / "profile.csv")
    return records


def _metric_fields(rec: BenchRecord) -> tuple[str, str]:
    if rec.vstar is None or not np.isfinite(rec.vfinal):
        return "", ""
    abs_diff = rec.vfinal - rec.vstar
    try:
        pgc = repr(percent_gap_closed(rec.v0, rec.vfinal, rec.vstar))
    except UndefinedMetricError:
        pgc = ""
    return pgc, repr(abs_diff)


def _write_summary(records, path: Path) -> None:
    lines = [",".join(SUMMARY_COLUMNS)]
    for rec in sorted(records, key=lambda r: (r.instance, r.approach)):
        pgc, abs_diff = _metric_fields(rec)
        lines.append(
            ",".join(
                [
                    rec.instance,
                    rec.approach,
                    repr(rec.v0),
                    repr(rec.vfinal),
                    "" if rec.vstar is None else repr(rec.vstar),
                    pgc,
                    abs_diff,
                    rec.status,
                    str(rec.iters),
                    Path(rec.log_path).name if rec.log_path else "",
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _write_profile(records, results, path: Path, points: int = 64) -> None:
    """Mean absolute difference and percent gap closed per approach over wall time."""
    max_t = 0.0
    for res in results.values():
        if res.iterations:
            max_t = max(max_t, res.iterations[-1].time_s)
    if max_t <= 0:
        max_t = 1e-3
    grid = np.linspace(0.0, max_t, points)
    by_approach: dict[str, list[BenchRecord]] = {}
    for rec in records:
        if rec.vstar is not None and np.isfinite(rec.vfinal):
            by_approach.setdefault(rec.approach, []).append(rec)
    lines = ["approach,time_s,mean_abs_diff,mean_pct_gap_closed"]
    for name in sorted(by_approach):
        recs = by_approach[name]
        for t in grid:
            diffs, pgcs = [], []
            for rec in recs:
                res = results.get((rec.instance, rec.approach))
                if res is None or not res.iterations:
                    continue
                v_t = best_so_far_at(res.iterations, t)
                diffs.append(v_t - rec.vstar)
                if rec.v0 > rec.vstar:
                    pgcs.append((rec.v0 - v_t) / (rec.v0 - rec.vstar))
            mean_diff = repr(float(np.mean(diffs))) if diffs else ""
            mean_pgc = repr(float(np.mean(pgcs))) if pgcs else ""
            lines.append(f"{name},{t:.6f},{mean_diff},{mean_pgc}")
    path.write_text("\n".join(lines) + "\n")
