"""Projected gradient baseline with box clamping and Dykstra projection for linear rows."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import InvalidInputError, NumericalFailureError
from .model import LossSpec, NetworkSpec, loss_and_gradient
from .result import IterationRow, RunResult, RunStatus
from .subproblems import FeasibleSet

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ROUNDS = 1000


@dataclass(frozen=True)
class PgdConfig:
    step_scale: float = 1e-3  # scalar multiplying the gradient
    alpha: float = 1.0  # mixing weight toward the projected target
    max_iters: int = 10_000
    stall_limit: int = 20
    projection_period: int = 16

    def __post_init__(self):
        if self.step_scale <= 0:
            raise InvalidInputError("step_scale must be positive")
        if not 0 < self.alpha <= 1:
            raise InvalidInputError("alpha must lie in (0, 1]")
        if self.max_iters < 1 or self.stall_limit < 1 or self.projection_period < 1:
            raise InvalidInputError("iteration counts must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "PgdConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def _project_row(x: np.ndarray, a: np.ndarray, rhs: float, sense: str) -> np.ndarray:
    v = float(a @ x)
    if sense == lp.LE and v <= rhs:
        return x
    if sense == lp.GE and v >= rhs:
        return x
    if sense == lp.EQ and v == rhs:
        return x
    return x + (rhs - v) / float(a @ a) * a


def project(x, feasible: FeasibleSet) -> np.ndarray:
    """Euclidean projection onto the feasible set.

    A bare box is a componentwise clamp. With linear rows, Dykstra's alternating
    projections cycle over the box and each row until successive full cycles
    agree within DYKSTRA_TOL.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != feasible.dim:
        raise InvalidInputError("point dimension does not match the feasible set")
    if not feasible.rows:
        return feasible.clamp(x)
    n_sets = 1 + len(feasible.rows)
    corrections = [np.zeros(x.size) for _ in range(n_sets)]
    cur = x.copy()
    for _ in range(DYKSTRA_MAX_ROUNDS):
        prev = cur.copy()
        for i in range(n_sets):
            probe = cur + corrections[i]
            if i == 0:
                proj = feasible.clamp(probe)
            else:
                a, rhs, sense = feasible.rows[i - 1]
                proj = _project_row(probe, a, rhs, sense)
            corrections[i] = probe - proj
            cur = proj
        if float(np.max(np.abs(cur - prev))) < DYKSTRA_TOL:
            # An empty intersection also stabilizes the cycle end, but on an
            # infeasible point: reject it instead of returning it.
            if not feasible.contains(cur, 1e-8):
                raise NumericalFailureError(
                    "projection target does not exist: the feasible set appears empty"
                )
            return cur
    raise NumericalFailureError(
        f"Dykstra projection did not converge within {DYKSTRA_MAX_ROUNDS} rounds"
    )


def run(
    net: NetworkSpec,
    loss: LossSpec,
    feasible: FeasibleSet,
    x0,
    config: PgdConfig | None = None,
) -> RunResult:
    """Iterate x <- x + alpha * (target - x) with target = x - s * grad, projected periodically."""
    cfg = config or PgdConfig()
    if feasible.dim != net.input_dim:
        raise InvalidInputError("feasible set dimension does not match the network input")
    x = np.asarray(x0, dtype=float).reshape(-1)
    warnings: list[str] = []
    if not feasible.contains(x):
        x = project(x, feasible)
        warnings.append("start point was outside the feasible set and has been projected in")

    rows: list[IterationRow] = []
    best_x, best_g = x.copy(), np.inf
    stall = 0
    status = RunStatus.ITERATION_LIMIT
    t_start = time.perf_counter()
    for k in range(cfg.max_iters):
        g, grad = loss_and_gradient(net, loss, x)
        if g < best_g:
            best_x, best_g = x.copy(), g
            stall = 0
        else:
            stall += 1
        rows.append(
            IterationRow(
                k, time.perf_counter() - t_start, "primal", g, best_g, cfg.step_scale, 0
            )
        )
        if stall >= cfg.stall_limit:
            status = RunStatus.STALLED
            break
        target = x - cfg.step_scale * grad
        if (k + 1) % cfg.projection_period == 0:
            target = project(target, feasible)
        x_next = x + cfg.alpha * (target - x)
        if np.array_equal(x_next, x):
            status = RunStatus.FIXED_POINT
            break
        x = x_next

    # Report the value at a feasible point: the best iterate may have drifted
    # outside between periodic projections.
    final_x = project(best_x, feasible)
    final_g, _ = loss_and_gradient(net, loss, final_x)
    if rows:
        rows[-1] = dataclasses.replace(rows[-1], status=status.value)
    return RunResult(
        x=final_x,
        value=final_g,
        status=status,
        iterations=tuple(rows),
        warnings=tuple(warnings),
    )
