"""Benchmark instance generation, the illustrative 1-D network, and brute-force oracles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lp
from .errors import InfeasibleRegionError, InvalidInputError
from .model import (
    ACT_LINEAR,
    ACT_RELU,
    ActivationPattern,
    Layer,
    LossSpec,
    NetworkSpec,
    evaluate_batch,
    forward,
    load_network,
    loss_and_gradient_in_pattern,
    loss_values_batch,
)
from .regions import RegionSystem, region_system
from .subproblems import FeasibleSet


def generate_network(arch, seed: int) -> NetworkSpec:
    """Random network for the given layer sizes (input first, output last).

    Weights and biases are standard normal scaled by 1/sqrt(fan-in), which keeps
    outputs from blowing up through depth; hidden layers are ReLU, the output linear.
    """
    arch = [int(a) for a in arch]
    if len(arch) < 2 or any(a < 1 for a in arch):
        raise InvalidInputError("architecture needs >= 2 positive layer sizes")
    rng = np.random.default_rng(seed)
    layers = []
    for li in range(1, len(arch)):
        fan_in = arch[li - 1]
        scale = 1.0 / np.sqrt(fan_in)
        w = rng.standard_normal((arch[li], fan_in)) * scale
        b = rng.standard_normal(arch[li]) * scale
        act = ACT_LINEAR if li == len(arch) - 1 else ACT_RELU
        layers.append(Layer(w, b, act))
    return NetworkSpec(tuple(layers))


def normalize_outputs(net: NetworkSpec, sample_count: int = 4096, seed: int = 0) -> NetworkSpec:
    """Append a linear layer mapping each output onto [0, 1] over a uniform input sample.

    The extra layer is affine, so activation regions are unchanged. Outputs whose
    sampled spread is below 1e-12 map to the constant 0.5.
    """
    if sample_count < 2:
        raise InvalidInputError("need at least two samples to estimate output ranges")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 1.0, size=(sample_count, net.input_dim))
    ys = evaluate_batch(net, xs)
    lo = ys.min(axis=0)
    hi = ys.max(axis=0)
    span = hi - lo
    m = net.output_dim
    w = np.zeros((m, m))
    b = np.zeros(m)
    for i in range(m):
        if span[i] < 1e-12:
            b[i] = 0.5
        else:
            w[i, i] = 1.0 / span[i]
            b[i] = -lo[i] / span[i]
    return NetworkSpec(net.layers + (Layer(w, b, ACT_LINEAR),))


def toy_network_1d() -> NetworkSpec:
    """1x4x1 piecewise-linear network with knots at 1, 2, 3, 4.

    f(x) = relu(x-1) - 2 relu(x-2) + 2 relu(x-3) - relu(x-4). With target 0 and
    squared error on [0, 5], the loss is flat at 0 on [0, 1], has a kink minimum
    at x = 3, and a flat plateau of value 1 on [4, 5] whose left edge descends.
    """
    w1 = np.ones((4, 1))
    b1 = np.array([-1.0, -2.0, -3.0, -4.0])
    w2 = np.array([[1.0, -2.0, 2.0, -1.0]])
    b2 = np.zeros(1)
    return NetworkSpec((Layer(w1, b1, ACT_RELU), Layer(w2, b2, ACT_LINEAR)))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A network inversion task: target, feasible inputs, starting points."""

    net: NetworkSpec
    target: np.ndarray
    feasible: FeasibleSet
    starts: np.ndarray  # (k, input_dim)
    name: str = "instance"
    seed: int | None = None

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float).reshape(-1)
        starts = np.asarray(self.starts, dtype=float)
        if starts.ndim == 1:
            starts = starts.reshape(1, -1)
        if target.size != self.net.output_dim:
            raise InvalidInputError("target dimension does not match the network output")
        if starts.shape[1] != self.net.input_dim:
            raise InvalidInputError("start dimension does not match the network input")
        if self.feasible.dim != self.net.input_dim:
            raise InvalidInputError("feasible set dimension does not match the network input")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "starts", starts)

    @property
    def loss(self) -> LossSpec:
        return LossSpec(self.target)


def make_random_instance(
    arch, seed: int, n_starts: int = 1, normalize: bool = True, sample_count: int = 4096
) -> ProblemInstance:
    """Random instance on the unit box: scaled network, uniform target and starts."""
    net = generate_network(arch, seed)
    if normalize:
        net = normalize_outputs(net, sample_count, seed + 1)
    rng = np.random.default_rng(seed + 2)
    target = rng.uniform(0.0, 1.0, size=net.output_dim)
    starts = rng.uniform(0.0, 1.0, size=(n_starts, net.input_dim))
    feasible = FeasibleSet(np.zeros(net.input_dim), np.ones(net.input_dim))
    return ProblemInstance(net, target, feasible, starts, name=f"rand-{seed}", seed=seed)


_SENSE_JSON = {"le": lp.LE, "ge": lp.GE, "eq": lp.EQ}
_SENSE_TO_JSON = {v: k for k, v in _SENSE_JSON.items()}


def instance_from_dict(data: dict, net: NetworkSpec | None = None, base_dir: str | Path = ".") -> ProblemInstance:
    if net is None:
        model = data.get("model")
        if model is None:
            raise InvalidInputError("instance needs a 'model' path when no network is given")
        net = load_network(Path(base_dir) / model)
    try:
        target = np.asarray(data["target"], dtype=float)
        box_lo = np.asarray(data["box_lo"], dtype=float)
        box_hi = np.asarray(data["box_hi"], dtype=float)
        starts = np.asarray(data["starts"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed instance: {exc}") from exc
    rows = []
    for rec in data.get("linear_constraints", []):
        try:
            sense = _SENSE_JSON[rec["sense"]]
            rows.append((np.asarray(rec["coeffs"], dtype=float), float(rec["rhs"]), sense))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed linear constraint: {exc}") from exc
    feasible = FeasibleSet(box_lo, box_hi, tuple(rows))
    return ProblemInstance(
        net, target, feasible, starts,
        name=str(data.get("name", "instance")),
        seed=data.get("seed"),
    )


def instance_to_dict(inst: ProblemInstance, model_path: str | None = None) -> dict:
    data = {
        "name": inst.name,
        "target": inst.target.tolist(),
        "box_lo": inst.feasible.lo.tolist(),
        "box_hi": inst.feasible.hi.tolist(),
        "linear_constraints": [
            {"coeffs": a.tolist(), "rhs": rhs, "sense": _SENSE_TO_JSON[sense]}
            for a, rhs, sense in inst.feasible.rows
        ],
        "starts": inst.starts.tolist(),
        "seed": inst.seed,
    }
    if model_path is not None:
        data["model"] = model_path
    return data


def load_instance(path: str | Path, net: NetworkSpec | None = None) -> ProblemInstance:
    path = Path(path)
    with open(path) as fh:
        return instance_from_dict(json.load(fh), net=net, base_dir=path.parent)


def save_instance(inst: ProblemInstance, path: str | Path, model_path: str | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst, model_path), fh)


def _breakpoints_1d(net: NetworkSpec, lo: float, hi: float) -> list[float]:
    """All input values where some ReLU pre-activation crosses zero on [lo, hi].

    Pre-activations are piecewise linear in 1-D, so roots inside each current
    interval follow exactly from the endpoint values.
    """
    points = {lo, hi}
    for li, layer in enumerate(net.layers):
        if layer.activation != ACT_RELU:
            continue
        grid = sorted(points)
        vals = np.array([forward(net, np.array([g]))[1].pre[li] for g in grid])
        for i in range(layer.n_out):
            for a, b in zip(range(len(grid) - 1), range(1, len(grid))):
                va, vb = vals[a, i], vals[b, i]
                if va == 0.0:
                    points.add(grid[a])
                if va * vb < 0.0:
                    root = grid[a] + (grid[b] - grid[a]) * va / (va - vb)
                    points.add(min(max(root, lo), hi))
        points_sorted = sorted(points)
        points = set(points_sorted)
    return sorted(points)


def oracle_grid(
    net: NetworkSpec, loss: LossSpec, feasible: FeasibleSet, resolution: float = 1e-3
):
    """Exhaustive grid search for one- and two-input networks.

    Returns (x_best, g_best, minima) where minima are grid points not improved
    by any grid neighbor. In 1-D the grid is augmented with all kink locations.
    """
    n = feasible.dim
    if n > 2:
        raise InvalidInputError("grid oracle supports at most two inputs")
    if resolution <= 0:
        raise InvalidInputError("resolution must be positive")
    if n == 1:
        lo, hi = float(feasible.lo[0]), float(feasible.hi[0])
        count = max(2, int(np.ceil((hi - lo) / resolution)) + 1)
        grid = np.linspace(lo, hi, count)
        grid = np.unique(np.concatenate([grid, np.asarray(_breakpoints_1d(net, lo, hi))]))
        ys = evaluate_batch(net, grid.reshape(-1, 1))
        gs = loss_values_batch(loss, ys)
        minima = []
        for i in range(grid.size):
            left_ok = i == 0 or gs[i] <= gs[i - 1]
            right_ok = i == grid.size - 1 or gs[i] <= gs[i + 1]
            if left_ok and right_ok:
                minima.append((np.array([grid[i]]), float(gs[i])))
        best = int(np.argmin(gs))
        return np.array([grid[best]]), float(gs[best]), minima

    lo, hi = feasible.lo, feasible.hi
    counts = [max(2, int(np.ceil((hi[i] - lo[i]) / resolution)) + 1) for i in range(2)]
    ax0 = np.linspace(lo[0], hi[0], counts[0])
    ax1 = np.linspace(lo[1], hi[1], counts[1])
    xs = np.stack(np.meshgrid(ax0, ax1, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = np.array([feasible.contains(x) for x in xs])
    gs_flat = np.full(xs.shape[0], np.inf)
    if keep.any():
        gs_flat[keep] = loss_values_batch(loss, evaluate_batch(net, xs[keep]))
    gs = gs_flat.reshape(counts[0], counts[1])
    minima = []
    for i in range(counts[0]):
        for j in range(counts[1]):
            if not np.isfinite(gs[i, j]):
                continue
            ok = True
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    if di == 0 and dj == 0:
                        continue
                    ii, jj = i + di, j + dj
                    if 0 <= ii < counts[0] and 0 <= jj < counts[1] and gs[ii, jj] < gs[i, j]:
                        ok = False
            if ok:
                minima.append((np.array([ax0[i], ax1[j]]), float(gs[i, j])))
    flat_best = int(np.argmin(gs_flat))
    return xs[flat_best].copy(), float(gs_flat[flat_best]), minima


@dataclass(frozen=True, eq=False)
class FwResult:
    x: np.ndarray
    value: float
    gap: float
    lower_bound: float


def oracle_region_fw(
    net: NetworkSpec,
    loss: LossSpec,
    feasible: FeasibleSet,
    pattern: ActivationPattern,
    iterations: int = 1000,
) -> FwResult:
    """Frank-Wolfe minimization of the region's affine piece over region ∩ feasible set.

    The linear subproblems run on the LP engine; step 2/(t+2). Returns the best
    iterate with its final duality gap and the best certified lower bound.
    """
    region = region_system(net, pattern)
    rows = region.lp_rows() + feasible.lp_rows()
    x = lp.find_feasible_point(rows, feasible.lo, feasible.hi)
    if x is None:
        raise InfeasibleRegionError("region does not intersect the feasible set")
    best_x, best_val = x.copy(), np.inf
    lower = -np.inf
    gap = np.inf
    for t in range(iterations):
        val, grad = loss_and_gradient_in_pattern(net, loss, x, pattern)
        if val < best_val:
            best_x, best_val = x.copy(), val
        sol = lp.solve(lp.LinearProgram.build(grad, rows, feasible.lo, feasible.hi))
        if sol.status != lp.LPStatus.OPTIMAL:
            raise InfeasibleRegionError("linear subproblem failed inside the region")
        s = sol.x
        gap = float(grad @ (x - s))
        lower = max(lower, val - gap)
        if gap <= 1e-12:
            break
        x = x + (2.0 / (t + 2.0)) * (s - x)
    return FwResult(best_x, float(best_val), float(gap), float(lower))


def sample_region(
    net: NetworkSpec,
    pattern_or_region: ActivationPattern | RegionSystem,
    feasible: FeasibleSet,
    count: int,
    rng: np.random.Generator,
    burn_in: int = 10,
) -> np.ndarray:
    """Hit-and-run samples from region ∩ box, seeded at a phase-1 feasible point."""
    region = (
        pattern_or_region
        if isinstance(pattern_or_region, RegionSystem)
        else region_system(net, pattern_or_region)
    )
    rows = region.lp_rows() + feasible.lp_rows()
    x = lp.find_feasible_point(rows, feasible.lo, feasible.hi)
    if x is None:
        raise InfeasibleRegionError("region does not intersect the feasible set")
    n = feasible.dim
    samples = []
    a_mat = np.vstack([r[0] for r in rows]) if rows else np.zeros((0, n))
    rhs = np.array([r[1] for r in rows])
    senses = [r[2] for r in rows]
    total = count + burn_in
    attempts = 0
    while len(samples) < total:
        attempts += 1
        if attempts > 100 * total:
            break
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        t_lo, t_hi = -np.inf, np.inf
        for i in range(a_mat.shape[0]):
            ad = float(a_mat[i] @ d)
            slack = rhs[i] - float(a_mat[i] @ x)
            if senses[i] == lp.EQ:
                if abs(ad) > 1e-12:
                    t_lo = t_hi = 0.0
                continue
            lim = slack / ad if abs(ad) > 1e-14 else None
            upper = senses[i] == lp.LE
            if lim is None:
                continue
            if (ad > 0) == upper:
                t_hi = min(t_hi, lim)
            else:
                t_lo = max(t_lo, lim)
        for i in range(n):
            if d[i] > 1e-14:
                t_hi = min(t_hi, (feasible.hi[i] - x[i]) / d[i])
                t_lo = max(t_lo, (feasible.lo[i] - x[i]) / d[i])
            elif d[i] < -1e-14:
                t_hi = min(t_hi, (feasible.lo[i] - x[i]) / d[i])
                t_lo = max(t_lo, (feasible.hi[i] - x[i]) / d[i])
        if not np.isfinite(t_lo) or not np.isfinite(t_hi) or t_hi <= t_lo:
            continue
        # Stay slightly interior so samples satisfy the closed region strictly.
        t = rng.uniform(t_lo * 0.999, t_hi * 0.999)
        x = x + t * d
        samples.append(x.copy())
    if len(samples) < total:
        # Degenerate (lower-dimensional) region: fall back to the seed point.
        while len(samples) < total:
            samples.append(x.copy())
    return np.asarray(samples[burn_in:])
