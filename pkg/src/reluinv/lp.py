"""Dense two-phase primal simplex for the small LPs used by every subproblem."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError, NumericalFailureError

FEAS_TOL = 1e-8
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10

LE, GE, EQ = "<=", ">=", "="


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min c.x subject to rows (a, rhs, sense) and box bounds lo <= x <= hi (inf allowed)."""

    c: np.ndarray
    rows_a: np.ndarray
    rows_rhs: np.ndarray
    senses: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def build(cls, c, rows, lo, hi) -> "LinearProgram":
        c = np.asarray(c, dtype=float).reshape(-1)
        d = c.size
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.size != d or hi.size != d:
            raise InvalidInputError("bound vectors must match objective dimension")
        if np.any(lo > hi):
            raise InvalidInputError("lower bound exceeds upper bound")
        if not np.isfinite(c).all():
            raise InvalidInputError("objective coefficients must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInputError("bounds may be infinite but not NaN")
        senses = []
        a_list, rhs_list = [], []
        for a, rhs, sense in rows:
            a = np.asarray(a, dtype=float).reshape(-1)
            if a.size != d:
                raise InvalidInputError("row dimension mismatch")
            if not (np.isfinite(a).all() and np.isfinite(rhs)):
                raise InvalidInputError("row coefficients must be finite")
            if sense not in (LE, GE, EQ):
                raise InvalidInputError(f"unknown row sense {sense!r}")
            a_list.append(a)
            rhs_list.append(float(rhs))
            senses.append(sense)
        rows_a = np.asarray(a_list, dtype=float) if a_list else np.zeros((0, d))
        rows_rhs = np.asarray(rhs_list, dtype=float)
        return cls(c, rows_a, rows_rhs, tuple(senses), lo, hi)

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.rows_a.shape[0]


@dataclass(frozen=True, eq=False)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None
    objective: float | None
    pivots: int = 0
    objective_path: tuple[float, ...] = ()  # phase-2 objective per pivot, when requested


class _Tableau:
    """Simplex state over the nonnegative standard form u >= 0, A u = b, b >= 0."""

    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int], bland_after: int, max_iters: int):
        self.t = np.column_stack([a, b])
        self.basis = list(basis)
        self.bland_after = bland_after
        self.max_iters = max_iters
        self.pivots = 0
        self.degenerate_streak = 0
        self.bland = False

    @property
    def n_cols(self) -> int:
        return self.t.shape[1] - 1

    def _price_out(self, cost: np.ndarray) -> np.ndarray:
        cb = cost[self.basis]
        return cost - cb @ self.t[:, :-1]

    def run(self, cost: np.ndarray, blocked: np.ndarray, path: list | None = None) -> str:
        """Minimize cost.u from the current basis. Returns 'optimal' or 'unbounded'."""
        m = self.t.shape[0]
        while True:
            if path is not None:
                path.append(float(cost[self.basis] @ self.t[:, -1]))
            reduced = self._price_out(cost)
            reduced[blocked] = 0.0
            if self.bland:
                candidates = np.flatnonzero(reduced < -OPT_TOL)
                if candidates.size == 0:
                    return "optimal"
                enter = int(candidates[0])
            else:
                enter = int(np.argmin(reduced))
                if reduced[enter] >= -OPT_TOL:
                    return "optimal"
            col = self.t[:, enter]
            rhs = self.t[:, -1]
            eligible = np.flatnonzero(col > PIVOT_TOL)
            if eligible.size == 0:
                return "unbounded"
            ratios = rhs[eligible] / col[eligible]
            best = ratios.min()
            ties = eligible[ratios <= best + PIVOT_TOL]
            if self.bland:
                leave = int(min(ties, key=lambda r: self.basis[r]))
            else:
                leave = int(ties[0])
            if best <= FEAS_TOL:
                self.degenerate_streak += 1
                if self.degenerate_streak >= self.bland_after:
                    self.bland = True
            else:
                self.degenerate_streak = 0
            self._pivot(leave, enter)
            self.pivots += 1
            if self.pivots > self.max_iters:
                raise NumericalFailureError(
                    f"simplex exceeded {self.max_iters} pivots (size {m}x{self.n_cols})"
                )

    def _pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row] /= t[row, col]
        piv = t[row]
        factors = t[:, col].copy()
        factors[row] = 0.0
        t -= np.outer(factors, piv)
        t[:, col] = 0.0
        t[row, col] = 1.0
        rhs = t[:, -1]
        rhs[(rhs < 0.0) & (rhs > -1e-9)] = 0.0
        self.basis[row] = col

    def solution(self, n_vars: int) -> np.ndarray:
        u = np.zeros(self.n_cols)
        for r, col in enumerate(self.basis):
            u[col] = self.t[r, -1]
        return u[:n_vars]


def _substitute_bounds(lp: LinearProgram):
    """Shift/split variables so every structural variable is nonnegative."""
    d = lp.dim
    modes = []  # (kind, column(s), data) used to map u back to x
    n_u = 0
    extra_rows = []  # (u_col, ub) for two-sided bounds
    for i in range(d):
        lo_i, hi_i = lp.lo[i], lp.hi[i]
        if np.isfinite(lo_i):
            modes.append(("lo", n_u, lo_i))
            if np.isfinite(hi_i):
                extra_rows.append((n_u, hi_i - lo_i))
            n_u += 1
        elif np.isfinite(hi_i):
            modes.append(("hi", n_u, hi_i))
            n_u += 1
        else:
            modes.append(("free", n_u, 0.0))
            n_u += 2

    def expand_row(a: np.ndarray) -> tuple[np.ndarray, float]:
        row = np.zeros(n_u)
        shift = 0.0
        for i, (kind, col, val) in enumerate(modes):
            if kind == "lo":
                row[col] = a[i]
                shift += a[i] * val
            elif kind == "hi":
                row[col] = -a[i]
                shift += a[i] * val
            else:
                row[col] = a[i]
                row[col + 1] = -a[i]
        return row, shift

    rows, rhs, senses = [], [], []
    for k in range(lp.n_rows):
        row, shift = expand_row(lp.rows_a[k])
        rows.append(row)
        rhs.append(lp.rows_rhs[k] - shift)
        senses.append(lp.senses[k])
    for col, ub in extra_rows:
        row = np.zeros(n_u)
        row[col] = 1.0
        rows.append(row)
        rhs.append(ub)
        senses.append(LE)
    a = np.asarray(rows) if rows else np.zeros((0, n_u))
    return modes, n_u, a, np.asarray(rhs, dtype=float), senses


def _recover(modes, u: np.ndarray, lp: LinearProgram) -> np.ndarray:
    x = np.zeros(lp.dim)
    for i, (kind, col, val) in enumerate(modes):
        if kind == "lo":
            x[i] = val + max(u[col], 0.0)
        elif kind == "hi":
            x[i] = val - max(u[col], 0.0)
        else:
            x[i] = u[col] - u[col + 1]
    return np.minimum(np.maximum(x, lp.lo), lp.hi)


def _assemble(n_u: int, a: np.ndarray, rhs: np.ndarray, senses):
    """Add slack/artificial columns; returns tableau inputs and column bookkeeping."""
    m = a.shape[0]
    rhs = rhs.copy()
    a = a.copy()
    flip = rhs < 0.0
    a[flip] *= -1.0
    rhs[flip] = -rhs[flip]
    senses = [
        ({LE: GE, GE: LE, EQ: EQ}[s] if f else s) for s, f in zip(senses, flip)
    ]
    slack_cols = []
    art_rows = []
    blocks = [a]
    n_slack = 0
    slack = np.zeros((m, sum(1 for s in senses if s != EQ)))
    basis = [-1] * m
    for r, s in enumerate(senses):
        if s == EQ:
            art_rows.append(r)
            continue
        slack[r, n_slack] = 1.0 if s == LE else -1.0
        slack_cols.append(n_u + n_slack)
        if s == LE:
            basis[r] = n_u + n_slack
        else:
            art_rows.append(r)
        n_slack += 1
    blocks.append(slack)
    n_art = len(art_rows)
    art = np.zeros((m, n_art))
    for j, r in enumerate(art_rows):
        art[r, j] = 1.0
        basis[r] = n_u + n_slack + j
    blocks.append(art)
    full = np.hstack(blocks) if m else np.zeros((0, n_u + n_slack + n_art))
    return full, rhs, basis, n_slack, n_art


def _phase1(tab: _Tableau, n_art: int) -> bool:
    """Drive artificials to zero. Returns True when a feasible basis was found."""
    n_cols = tab.n_cols
    if n_art == 0:
        return True
    cost = np.zeros(n_cols)
    cost[n_cols - n_art:] = 1.0
    status = tab.run(cost, blocked=np.zeros(n_cols, dtype=bool))
    if status != "optimal":  # pragma: no cover - phase 1 is bounded below
        raise NumericalFailureError("phase 1 terminated abnormally")
    obj = cost[tab.basis] @ tab.t[:, -1]
    if obj > FEAS_TOL:
        return False
    # Pivot remaining artificials out of the basis; drop rows that are redundant.
    art_start = n_cols - n_art
    drop = []
    for r in range(tab.t.shape[0]):
        if tab.basis[r] < art_start:
            continue
        row = tab.t[r, :art_start]
        pivots = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        if pivots.size:
            tab._pivot(r, int(pivots[0]))
        else:
            drop.append(r)
    if drop:
        keep = [r for r in range(tab.t.shape[0]) if r not in drop]
        tab.t = tab.t[keep]
        tab.basis = [tab.basis[r] for r in keep]
    return True


def _solve_standard(n_u, a, rhs, senses, cost_u, max_iters, bland_after, path=None):
    full, b, basis, n_slack, n_art = _assemble(n_u, a, rhs, senses)
    tab = _Tableau(full, b, basis, bland_after, max_iters)
    if not _phase1(tab, n_art):
        return None, tab.pivots, "infeasible"
    n_cols = tab.n_cols
    cost = np.zeros(n_cols)
    cost[:n_u] = cost_u
    blocked = np.zeros(n_cols, dtype=bool)
    blocked[n_cols - n_art:] = True
    status = tab.run(cost, blocked, path)
    if status == "unbounded":
        return None, tab.pivots, "unbounded"
    return tab.solution(n_u), tab.pivots, "optimal"


def solve(lp: LinearProgram, collect_objective_path: bool = False) -> LPSolution:
    """Two-phase dense simplex; deterministic pivoting with a Bland fallback."""
    modes, n_u, a, rhs, senses = _substitute_bounds(lp)
    cost_u = np.zeros(n_u)
    shift = 0.0
    for i, (kind, col, val) in enumerate(modes):
        if kind == "lo":
            cost_u[col] += lp.c[i]
            shift += lp.c[i] * val
        elif kind == "hi":
            cost_u[col] -= lp.c[i]
            shift += lp.c[i] * val
        else:
            cost_u[col] += lp.c[i]
            cost_u[col + 1] -= lp.c[i]
    scale = lp.dim + lp.n_rows
    path: list | None = [] if collect_objective_path else None
    u, pivots, status = _solve_standard(
        n_u, a, rhs, senses, cost_u,
        max_iters=10_000 * scale,
        bland_after=5 * scale,
        path=path,
    )
    if status == "infeasible":
        return LPSolution(LPStatus.INFEASIBLE, None, None, pivots)
    if status == "unbounded":
        return LPSolution(LPStatus.UNBOUNDED, None, None, pivots)
    x = _recover(modes, u, lp)
    objective_path = tuple(v + shift for v in path) if path is not None else ()
    return LPSolution(LPStatus.OPTIMAL, x, float(lp.c @ x), pivots, objective_path)


def check_feasible(rows, lo, hi) -> bool:
    """Phase-1 feasibility of rows plus box bounds."""
    return find_feasible_point(rows, lo, hi) is not None


def find_feasible_point(rows, lo, hi) -> np.ndarray | None:
    """A point satisfying rows and bounds, or None when the system is infeasible."""
    lo = np.asarray(lo, dtype=float).reshape(-1)
    lp = LinearProgram.build(np.zeros(lo.size), rows, lo, hi)
    modes, n_u, a, rhs, senses = _substitute_bounds(lp)
    scale = lp.dim + lp.n_rows
    u, _, status = _solve_standard(
        n_u, a, rhs, senses, np.zeros(n_u),
        max_iters=10_000 * scale,
        bland_after=5 * scale,
    )
    if status == "infeasible":
        return None
    return _recover(modes, u, lp)
