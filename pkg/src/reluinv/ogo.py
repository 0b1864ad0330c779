"""Outer-approximation guided optimization: primal descent phase plus a dual
phase that certifies epsilon-local optimality region by region."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import BoundaryCapError, InfeasibleRegionError, InvalidInputError, NumericalFailureError
from .model import LossSpec, NetworkSpec, gradient_in_pattern
from .pgd import project
from .regions import neighbor_patterns, precheck_descent, region_system
from .result import IterationRow, RegionReport, RunResult, RunStatus
from .subproblems import (
    CutPool,
    FeasibleSet,
    cuts_in_neighbor_regions,
    descent_check,
    solve_local_master,
    solve_master,
    solve_region_master,
)

# The stationarity gate must scale with the gradient magnitude: near a kink the
# LP optimum sits on a vertex whose coordinates carry the solver's feasibility
# tolerance, so a flat threshold either stalls true optima or certifies early.
OC_GATE_FLOOR = 1e-12
OC_NOISE_FACTOR = 20.0 * lp.FEAS_TOL


@dataclass(frozen=True)
class OgoConfig:
    step_init: float = 0.01
    step_min: float | None = None  # defaults to eps * sqrt(input_dim)
    step_max: float = 1.0
    neighbor_radius: float = 0.1
    step_shrink: float = 0.9
    step_grow: float = 1.5
    eps: float = 1e-5
    max_iters: int = 1000
    tau: float = 1e-6
    boundary_cap: int = 20
    eps_oc: float = 1e-8

    def __post_init__(self):
        if not 0 < self.step_shrink < 1 < self.step_grow:
            raise InvalidInputError("need 0 < step_shrink < 1 < step_grow")
        if self.eps <= 0 or self.max_iters < 1 or self.tau < 0:
            raise InvalidInputError("eps must be positive, max_iters >= 1, tau >= 0")
        if self.step_init <= 0 or self.step_max <= 0 or self.neighbor_radius <= 0:
            raise InvalidInputError("step sizes and neighborhood radius must be positive")
        if self.boundary_cap < 0 or self.eps_oc < 0:
            raise InvalidInputError("boundary_cap and eps_oc must be nonnegative")

    def resolve_step_min(self, input_dim: int) -> float:
        step_min = self.eps * math.sqrt(input_dim) if self.step_min is None else self.step_min
        if not 0 < step_min <= self.step_init <= self.step_max:
            raise InvalidInputError(
                f"need 0 < step_min ({step_min}) <= step_init ({self.step_init})"
                f" <= step_max ({self.step_max})"
            )
        return step_min

    @classmethod
    def from_dict(cls, data: dict) -> "OgoConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


class _NeighborCache:
    """Feasible neighbor patterns and their region systems for the current incumbent."""

    def __init__(self, net, feasible, tau, cap):
        self.net = net
        self.feasible = feasible
        self.tau = tau
        self.cap = cap
        self.key: int | None = None
        self.entries: list = []

    def get(self, incumbent_index: int, x_star: np.ndarray):
        if self.key != incumbent_index:
            patterns = list(
                neighbor_patterns(self.net, x_star, self.tau, self.feasible, self.cap)
            )
            self.entries = [(p, region_system(self.net, p)) for p in patterns]
            self.key = incumbent_index
        return self.entries


def run(
    net: NetworkSpec,
    loss: LossSpec,
    feasible: FeasibleSet,
    x0,
    config: OgoConfig | None = None,
    on_iteration=None,
) -> RunResult:
    """Run the outer-approximation guided algorithm from x0.

    Each iteration evaluates the current point, adjusts the step size on
    improvement or failure, probes a direction with the localized master (or the
    plain master when its bound is tight), and in the dual phase examines the
    incumbent's neighbor regions until all are certified or one yields progress.
    """
    cfg = config or OgoConfig()
    if feasible.dim != net.input_dim:
        raise InvalidInputError("feasible set dimension does not match the network input")
    step_min = cfg.resolve_step_min(net.input_dim)
    warnings: list[str] = []

    x_k = np.asarray(x0, dtype=float).reshape(-1)
    if x_k.size != net.input_dim:
        raise InvalidInputError("start point dimension does not match the network input")
    if not feasible.contains(x_k):
        x_k = project(x_k, feasible)
        warnings.append("start point was outside the feasible set and has been projected in")

    pool = CutPool(net, loss, cfg.tau)
    certified: set = set()
    oc_probed: set = set()
    neighbors = _NeighborCache(net, feasible, cfg.tau, cfg.boundary_cap)
    rows: list[IterationRow] = []
    reports: list[RegionReport] = []
    xbar: np.ndarray | None = None
    gbar: float | None = None
    step = cfg.step_init
    dual = False
    t_start = time.perf_counter()

    def finish(status: RunStatus) -> RunResult:
        if rows:
            rows[-1] = dataclasses.replace(rows[-1], status=status.value)
        return RunResult(
            x=xbar.copy(),
            value=gbar,
            status=status,
            iterations=tuple(rows),
            warnings=tuple(warnings),
            certified=tuple(sorted((p.active for p in certified), key=sorted)),
            region_reports=tuple(reports),
        )

    for k in range(cfg.max_iters + 1):
        rec = pool.add(x_k)
        improved = gbar is not None and rec.value < gbar
        if gbar is None:
            xbar, gbar = rec.x, rec.value
        if improved:
            step = min(cfg.step_grow * step, cfg.step_max)
            dual = False
            xbar, gbar = rec.x, rec.value
            certified.clear()
            oc_probed.clear()
        else:
            step = max(step_min, cfg.step_shrink * step)
        if step == step_min:
            dual = True

        x_hat = None
        cuts_used = 0
        phase = "primal"
        full_step = False
        try:
            if not dual:
                x_hat, bound, cuts_used = solve_local_master(
                    pool, feasible, cfg.neighbor_radius, rec.index
                )
                if gbar - bound < cfg.eps:
                    # Re-test the bound with the cuts lying in the incumbent's
                    # neighbor regions; a small gap there activates the dual
                    # phase. The probe stays with the localized master: the
                    # neighbor-region model extrapolates poorly far from the
                    # incumbent, so its minimizer is not a useful direction.
                    entries = neighbors.get(pool.incumbent_index, xbar)
                    selected = cuts_in_neighbor_regions(pool, [r for _, r in entries])
                    _, bound, cuts_used = solve_master(pool, feasible, selected)
                    if gbar - bound < cfg.eps:
                        dual = True

            if dual:
                phase = "dual"
                # Region-master probes are followed in full: the probe minimizes
                # the cutting-plane model over one convex region, so stepping to
                # it is Kelley's method there; scaling it by a floored step size
                # stalls the polish onto region boundaries.
                full_step = True
                entries = neighbors.get(pool.incumbent_index, xbar)
                if not entries:
                    raise NumericalFailureError(
                        f"iteration {k}: no feasible neighbor pattern at the incumbent"
                    )
                pending = [e for e in entries if e[0] not in certified]
                observations = [r.x for r in pool.records]
                flags = [
                    precheck_descent(net, loss, xbar, pat, observations, cfg.tau)
                    for pat, _ in pending
                ]
                ordered = [e for e, f in zip(pending, flags) if f] + [
                    e for e, f in zip(pending, flags) if not f
                ]
                x_hat = None
                fallback = None
                for pat, region in ordered:
                    try:
                        probe, bound, used = solve_region_master(pool, feasible, region)
                    except InfeasibleRegionError:
                        certified.add(pat)
                        continue
                    if gbar - bound >= cfg.eps:
                        reports.append(RegionReport(pat.active, bound, None, False, k))
                        x_hat, cuts_used = probe, used
                        break
                    try:
                        oc = descent_check(net, loss, xbar, region, feasible)
                    except InfeasibleRegionError:
                        certified.add(pat)
                        continue
                    grad_norm = float(
                        np.linalg.norm(gradient_in_pattern(net, loss, xbar, pat))
                    )
                    gate = min(cfg.eps_oc, max(OC_GATE_FLOOR, OC_NOISE_FACTOR * grad_norm))
                    if oc >= -gate:
                        reports.append(RegionReport(pat.active, bound, oc, True, k))
                        certified.add(pat)
                    elif pat in oc_probed:
                        # The descent probe for this incumbent already failed to
                        # produce progress; the gap bound alone certifies the
                        # region within eps (a linear descent value does not
                        # translate into improvement on a flat quadratic piece).
                        reports.append(RegionReport(pat.active, bound, oc, True, k))
                        certified.add(pat)
                    else:
                        reports.append(RegionReport(pat.active, bound, oc, False, k))
                        oc_probed.add(pat)
                        if fallback is None:
                            fallback = (probe, used)
                if x_hat is None:
                    if fallback is not None:
                        x_hat, cuts_used = fallback
                    elif all(pat in certified for pat, _ in entries):
                        rows.append(
                            IterationRow(
                                k, time.perf_counter() - t_start, phase,
                                rec.value, gbar, step, cuts_used,
                            )
                        )
                        if on_iteration is not None:
                            on_iteration(_snapshot(k, rec.x, improved, step, gbar, dual, certified))
                        return finish(RunStatus.EPS_LOCAL_OPTIMAL)
        except BoundaryCapError as exc:
            warnings.append(f"iteration {k}: {exc}")
            rows.append(
                IterationRow(k, time.perf_counter() - t_start, phase, rec.value, gbar, step, cuts_used)
            )
            return finish(RunStatus.PATTERN_CAP_EXCEEDED)
        except NumericalFailureError as exc:
            raise NumericalFailureError(f"iteration {k}: {exc}") from exc

        rows.append(
            IterationRow(k, time.perf_counter() - t_start, phase, rec.value, gbar, step, cuts_used)
        )
        if on_iteration is not None:
            on_iteration(_snapshot(k, rec.x, improved, step, gbar, dual, certified))
        if full_step:
            x_k = feasible.clamp(x_hat)
        else:
            x_k = feasible.clamp(xbar + step * (x_hat - xbar))

    return finish(RunStatus.ITERATION_LIMIT)


def _snapshot(k, x, improved, step, gbar, dual, certified):
    return {
        "iteration": k,
        "x": x,
        "improved": improved,
        "step": step,
        "g_best": gbar,
        "dual": dual,
        "certified_count": len(certified),
    }
