"""Shared fixtures and independent oracle helpers."""

import numpy as np
import pytest

from reluinv.instances import generate_network, toy_network_1d
from reluinv.model import LossSpec, evaluate_batch, forward, loss_values_batch, pattern_of
from reluinv.regions import region_system
from reluinv.subproblems import FeasibleSet


@pytest.fixture
def toy_net():
    return toy_network_1d()


@pytest.fixture
def toy_loss():
    return LossSpec(np.zeros(1))


@pytest.fixture
def toy_box():
    return FeasibleSet([0.0], [5.0])


def fd_gradient(net, loss, x, h=1e-6):
    """Central-difference gradient of the loss, batched over coordinates."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    probes = np.repeat(x[None, :], 2 * n, axis=0)
    for i in range(n):
        probes[2 * i, i] += h
        probes[2 * i + 1, i] -= h
    gs = loss_values_batch(loss, evaluate_batch(net, probes))
    return (gs[0::2] - gs[1::2]) / (2.0 * h)


def fd_safe(net, x, h=1e-6, factor=10.0):
    """True when no ReLU changes sign within an h-ball of x (safe for central differences)."""
    pattern, boundary = pattern_of(net, x, 0.0)
    if boundary.neurons:
        return False
    region = region_system(net, pattern)
    margins = np.abs(region.values(x))
    safety = factor * h * (np.abs(region.rows).sum(axis=1) + 1.0)
    return bool(np.all(margins > safety))


def sample_fd_safe_points(net, rng, count, lo=0.0, hi=1.0, h=1e-6):
    """Rejection-sample box points whose pattern is locally constant on the FD stencil."""
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 200 * count:
            raise RuntimeError("could not find enough interior points")
        x = rng.uniform(lo, hi, size=net.input_dim)
        if fd_safe(net, x, h):
            out.append(x)
    return out


def random_relu_net(rng, arch=None):
    """Small random network via the package generator with a seed drawn from rng."""
    if arch is None:
        depth = rng.integers(1, 3)
        sizes = [int(rng.integers(1, 4))] + [int(rng.integers(2, 6)) for _ in range(depth)] + [
            int(rng.integers(1, 3))
        ]
        arch = sizes
    return generate_network(arch, int(rng.integers(0, 2**31)))


def toy_loss_at(net, x, target=0.0):
    y, _ = forward(net, np.atleast_1d(x))
    return float((y[0] - target) ** 2)
