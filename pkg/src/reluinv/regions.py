"""Polyhedral activation regions: membership systems, neighbor patterns, separating cuts."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp
from .errors import BoundaryCapError, InvalidInputError, NoDiscrepancyError
from .model import (
    ACT_RELU,
    ActivationPattern,
    LossSpec,
    NetworkSpec,
    affine_by_layer,
    gradient_in_pattern,
    pattern_of,
)

ACTIVE, INACTIVE = 1, -1


@dataclass(frozen=True, eq=False)
class RegionSystem:
    """One inequality per ReLU neuron: row.x + offset >= 0 when active, <= 0 otherwise."""

    rows: np.ndarray  # (n_relu, input_dim)
    offsets: np.ndarray
    senses: np.ndarray  # +1 active, -1 inactive
    neurons: np.ndarray  # global ReLU indices, ascending
    pattern: ActivationPattern

    def values(self, x) -> np.ndarray:
        return self.rows @ np.asarray(x, dtype=float).reshape(-1) + self.offsets

    def margins(self, x) -> np.ndarray:
        """Signed slack per inequality; negative entries are violations."""
        return self.senses * self.values(x)

    def contains(self, x, tol: float = 0.0) -> bool:
        if self.rows.shape[0] == 0:
            return True
        return bool(self.margins(x).min() >= -tol)

    def lp_rows(self, pad: int = 0) -> list[tuple[np.ndarray, float, str]]:
        """Rows for the LP engine, optionally zero-padded with trailing variables."""
        out = []
        for row, off, sense in zip(self.rows, self.offsets, self.senses):
            a = np.concatenate([row, np.zeros(pad)]) if pad else row
            out.append((a, -off, lp.GE if sense == ACTIVE else lp.LE))
        return out


@dataclass(frozen=True, eq=False)
class FeasibilityCut:
    """Affine inequality separating a point from a region, built at the first violated neuron."""

    row: np.ndarray
    offset: float
    sense: int  # the region's required sense at that neuron
    neuron: int
    violation: float

    def as_leq(self) -> tuple[np.ndarray, float]:
        """Normalize to 0 >= r.x + d."""
        if self.sense == INACTIVE:
            return self.row, self.offset
        return -self.row, -self.offset

    def violated_by(self, x) -> bool:
        r, d = self.as_leq()
        return float(r @ np.asarray(x, dtype=float).reshape(-1) + d) > 0.0


def region_system(net: NetworkSpec, pattern: ActivationPattern) -> RegionSystem:
    """Inequality system of the polyhedron on which the network follows `pattern`."""
    rows, offs, senses, neurons = [], [], [], []
    for li, layer_rows, layer_offs in affine_by_layer(net, pattern):
        layer = net.layers[li]
        if layer.activation != ACT_RELU:
            continue
        base = net.offsets[li]
        for i in range(layer.n_out):
            j = base + i
            rows.append(layer_rows[i])
            offs.append(layer_offs[i])
            senses.append(ACTIVE if j in pattern.active else INACTIVE)
            neurons.append(j)
    n = net.input_dim
    return RegionSystem(
        np.asarray(rows) if rows else np.zeros((0, n)),
        np.asarray(offs, dtype=float),
        np.asarray(senses, dtype=int),
        np.asarray(neurons, dtype=int),
        pattern,
    )


def contains(region: RegionSystem, x, tol: float = 0.0) -> bool:
    return region.contains(x, tol)


def neighbor_patterns(net: NetworkSpec, x_star, tau: float, feasible, boundary_cap: int = 20):
    """Yield the feasible activation patterns obtained by resolving boundary neurons either way.

    `feasible` supplies the input constraints (lo/hi box and lp_rows); assignments whose
    region misses it are dropped. Enumeration is lexicographic with inactive before active.
    """
    base, boundary = pattern_of(net, x_star, tau)
    bset = sorted(boundary.neurons)
    if len(bset) > boundary_cap:
        raise BoundaryCapError(
            f"{len(bset)} boundary neurons exceed the enumeration cap of {boundary_cap}"
        )
    box_rows = feasible.lp_rows()
    for bits in itertools.product((False, True), repeat=len(bset)):
        active = base.active | {j for j, on in zip(bset, bits) if on}
        pat = ActivationPattern(frozenset(active), net.n_relu)
        region = region_system(net, pat)
        if lp.check_feasible(region.lp_rows() + box_rows, feasible.lo, feasible.hi):
            yield pat


def discrepancy_node(net: NetworkSpec, pattern_ref: ActivationPattern, pattern_obs: ActivationPattern) -> int:
    """Lowest-indexed neuron whose membership differs between the two patterns."""
    relu = set(int(j) for j in net.relu_indices)
    diff = (pattern_ref.active ^ pattern_obs.active) & relu
    if (pattern_ref.active | pattern_obs.active) - relu:
        raise InvalidInputError("pattern references a non-ReLU neuron")
    if not diff:
        raise NoDiscrepancyError("patterns are identical")
    return min(diff)


def feasibility_cut_from_region(region: RegionSystem, x_out, tau: float = 0.0) -> FeasibilityCut:
    """Cut at the first inequality of `region` violated by x_out (strictly beyond tau)."""
    margins = region.margins(x_out)
    for i in np.flatnonzero(margins < -tau):
        return FeasibilityCut(
            row=region.rows[i].copy(),
            offset=float(region.offsets[i]),
            sense=int(region.senses[i]),
            neuron=int(region.neurons[i]),
            violation=float(-margins[i]),
        )
    raise NoDiscrepancyError("point satisfies every region inequality")


def feasibility_cut(net: NetworkSpec, region_pattern: ActivationPattern, x_out, tau: float = 0.0) -> FeasibilityCut:
    return feasibility_cut_from_region(region_system(net, region_pattern), x_out, tau)


def precheck_descent(
    net: NetworkSpec,
    loss: LossSpec,
    x_star,
    pattern: ActivationPattern,
    observations,
    tol: float = 1e-8,
) -> bool:
    """Whether some observation inside the region lies in a descent direction from x_star."""
    region = region_system(net, pattern)
    grad = gradient_in_pattern(net, loss, x_star, pattern)
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    for xk in observations:
        xk = np.asarray(xk, dtype=float).reshape(-1)
        if region.contains(xk, tol) and float(grad @ (xk - x_star)) < 0.0:
            return True
    return False
