"""Cut pool and the outer-approximation subproblems solved during primal and dual phases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import InfeasibleRegionError, InvalidInputError
from .model import (
    ActivationPattern,
    BoundarySet,
    LossSpec,
    NetworkSpec,
    gradient_in_pattern,
    loss_and_gradient,
    loss_and_gradient_in_pattern,
    pattern_of,
)
from .regions import RegionSystem, feasibility_cut_from_region, region_system


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Bounded box plus optional linear rows on the inputs."""

    lo: np.ndarray
    hi: np.ndarray
    rows: tuple[tuple[np.ndarray, float, str], ...] = ()

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.size != hi.size or lo.size == 0:
            raise InvalidInputError("box bounds must be nonempty vectors of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise InvalidInputError("feasible box must be bounded")
        if np.any(lo > hi):
            raise InvalidInputError("box lower bound exceeds upper bound")
        rows = []
        for a, rhs, sense in self.rows:
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.size != lo.size:
                raise InvalidInputError("constraint dimension does not match the box")
            if not (np.isfinite(a).all() and np.isfinite(rhs)):
                raise InvalidInputError("constraint coefficients must be finite")
            if sense not in (lp.LE, lp.GE, lp.EQ):
                raise InvalidInputError(f"unknown constraint sense {sense!r}")
            a.flags.writeable = False
            rows.append((a, float(rhs), sense))
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "rows", tuple(rows))

    @property
    def dim(self) -> int:
        return self.lo.size

    def clamp(self, x) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(x, dtype=float).reshape(-1), self.lo), self.hi)

    def contains(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            return False
        for a, rhs, sense in self.rows:
            v = float(a @ x)
            if sense == lp.LE and v > rhs + tol:
                return False
            if sense == lp.GE and v < rhs - tol:
                return False
            if sense == lp.EQ and abs(v - rhs) > tol:
                return False
        return True

    def lp_rows(self, pad: int = 0) -> list[tuple[np.ndarray, float, str]]:
        out = []
        for a, rhs, sense in self.rows:
            row = np.concatenate([a, np.zeros(pad)]) if pad else a
            out.append((row, rhs, sense))
        return out


@dataclass(frozen=True, eq=False)
class CutRecord:
    """One evaluated point: base, value, gradient, and its activation/boundary tags."""

    index: int
    x: np.ndarray
    value: float
    gradient: np.ndarray
    pattern: ActivationPattern
    boundary: BoundarySet


class CutPool:
    """Ordered evaluation records with the incumbent tracked as the first argmin."""

    def __init__(self, net: NetworkSpec, loss: LossSpec, tau: float = 1e-6):
        self.net = net
        self.loss = loss
        self.tau = tau
        self.records: list[CutRecord] = []
        self.incumbent_index: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def add(self, x) -> CutRecord:
        x = np.asarray(x, dtype=float).reshape(-1).copy()
        value, grad = loss_and_gradient(self.net, self.loss, x)
        pattern, boundary = pattern_of(self.net, x, self.tau)
        rec = CutRecord(len(self.records), x, value, grad, pattern, boundary)
        self.records.append(rec)
        if self.incumbent_index is None or value < self.records[self.incumbent_index].value:
            self.incumbent_index = rec.index
        return rec

    @property
    def incumbent(self) -> CutRecord:
        if self.incumbent_index is None:
            raise InvalidInputError("cut pool is empty")
        return self.records[self.incumbent_index]

    @property
    def best_value(self) -> float:
        return self.incumbent.value


def cuts_in_neighbor_regions(
    pool: CutPool, regions: list[RegionSystem], tol: float | None = None
) -> list[int]:
    """Record indices whose base point lies in one of the incumbent's neighbor regions.

    The incumbent itself is always selected; its membership can be lost to roundoff
    when boundary neurons sit slightly off their hyperplanes.
    """
    tol = pool.tau if tol is None else tol
    chosen = {pool.incumbent_index}
    for rec in pool.records:
        if any(region.contains(rec.x, tol) for region in regions):
            chosen.add(rec.index)
    return sorted(chosen)


def _cut_row(x_k, value, grad, pad_dim):
    # v >= value + grad.(x - x_k)  rewritten over variables (x, v)
    a = np.concatenate([-grad, [1.0]])
    rhs = value - float(grad @ x_k)
    return a, rhs, lp.GE


def _master_lp(cut_rows, feasible: FeasibleSet, extra_rows=()):
    n = feasible.dim
    c = np.zeros(n + 1)
    c[-1] = 1.0
    lo = np.concatenate([feasible.lo, [-np.inf]])
    hi = np.concatenate([feasible.hi, [np.inf]])
    rows = list(cut_rows) + feasible.lp_rows(pad=1) + list(extra_rows)
    return lp.LinearProgram.build(c, rows, lo, hi)


def solve_master(pool: CutPool, feasible: FeasibleSet, indices) -> tuple[np.ndarray, float, int]:
    """Outer-approximation master over the selected cuts; returns (x, bound, rows used)."""
    indices = list(indices)
    if not indices:
        raise InvalidInputError("master problem needs at least one cut")
    n = feasible.dim
    cut_rows = []
    seen = set()
    for k in indices:
        rec = pool.records[k]
        key = rec.x.tobytes()
        if key in seen:  # repeated evaluations generate identical hyperplanes
            continue
        seen.add(key)
        cut_rows.append(_cut_row(rec.x, rec.value, rec.gradient, n))
    sol = lp.solve(_master_lp(cut_rows, feasible))
    if sol.status == lp.LPStatus.INFEASIBLE:
        raise InvalidInputError("feasible set is empty")
    if sol.status == lp.LPStatus.UNBOUNDED:  # pragma: no cover - box keeps masters bounded
        raise InvalidInputError("master problem unbounded; feasible set must be compact")
    return sol.x[:n].copy(), float(sol.x[n]), len(cut_rows)


def filter_cuts_near_incumbent(pool: CutPool, radius: float) -> list[int]:
    """Cuts within `radius` of the incumbent whose hyperplane keeps the incumbent feasible.

    A hyperplane excludes the incumbent when its linearization at the incumbent
    exceeds the incumbent value; those (and the equality case) are dropped.
    """
    best = pool.incumbent
    chosen = []
    for rec in pool.records:
        linearized = rec.value + float(rec.gradient @ (best.x - rec.x))
        if linearized < best.value and float(np.linalg.norm(best.x - rec.x)) <= radius:
            chosen.append(rec.index)
    return chosen


def solve_local_master(
    pool: CutPool, feasible: FeasibleSet, radius: float, latest_index: int
) -> tuple[np.ndarray, float, int]:
    """Distance-localized master: filtered cuts plus, always, the latest one."""
    indices = sorted(set(filter_cuts_near_incumbent(pool, radius)) | {latest_index})
    return solve_master(pool, feasible, indices)


def solve_region_master(
    pool: CutPool, feasible: FeasibleSet, region: RegionSystem
) -> tuple[np.ndarray, float, int]:
    """Region-restricted master: objective cuts from inside, separating cuts from outside.

    In-region observations are re-linearized with the region's masks so the cuts
    describe the region's own affine piece; the probe is confined to the region.
    """
    net, loss, tau = pool.net, pool.loss, pool.tau
    n = feasible.dim
    cut_rows = []
    seen_points = set()
    seen_neurons = set()
    for rec in pool.records:
        if region.contains(rec.x, tau):
            key = rec.x.tobytes()
            if key in seen_points:
                continue
            seen_points.add(key)
            value, grad = loss_and_gradient_in_pattern(net, loss, rec.x, region.pattern)
            cut_rows.append(_cut_row(rec.x, value, grad, n))
        else:
            cut = feasibility_cut_from_region(region, rec.x)
            if cut.neuron in seen_neurons:  # same violated inequality, same row
                continue
            seen_neurons.add(cut.neuron)
            r, d = cut.as_leq()
            cut_rows.append((np.concatenate([r, [0.0]]), -d, lp.LE))
    sol = lp.solve(_master_lp(cut_rows, feasible, extra_rows=region.lp_rows(pad=1)))
    if sol.status == lp.LPStatus.INFEASIBLE:
        raise InfeasibleRegionError("region does not intersect the feasible set")
    if sol.status == lp.LPStatus.UNBOUNDED:  # pragma: no cover
        raise InvalidInputError("region master unbounded; feasible set must be compact")
    return sol.x[:n].copy(), float(sol.x[n]), len(cut_rows)


def descent_check(
    net: NetworkSpec,
    loss: LossSpec,
    x_star,
    pattern_or_region: ActivationPattern | RegionSystem,
    feasible: FeasibleSet,
) -> float:
    """Minimum of grad.(x - x_star) over the region; zero certifies no descent direction."""
    region = (
        pattern_or_region
        if isinstance(pattern_or_region, RegionSystem)
        else region_system(net, pattern_or_region)
    )
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    grad = gradient_in_pattern(net, loss, x_star, region.pattern)
    prog = lp.LinearProgram.build(
        grad, region.lp_rows() + feasible.lp_rows(), feasible.lo, feasible.hi
    )
    sol = lp.solve(prog)
    if sol.status == lp.LPStatus.INFEASIBLE:
        raise InfeasibleRegionError("region does not intersect the feasible set")
    if sol.status == lp.LPStatus.UNBOUNDED:  # pragma: no cover
        raise InvalidInputError("descent check unbounded; feasible set must be compact")
    return float(sol.objective - grad @ x_star)
