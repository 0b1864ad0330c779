"""Network evaluation, gradients, activation patterns, masked affine algebra, model files."""

import json

import numpy as np
import pytest

from conftest import fd_gradient, random_relu_net, sample_fd_safe_points
from reluinv.errors import InvalidInputError
from reluinv.model import (
    ActivationPattern,
    Layer,
    LossSpec,
    NetworkSpec,
    forward,
    gradient_in_pattern,
    load_network,
    loss_and_gradient,
    masked_affine,
    masked_forward,
    network_from_dict,
    network_to_dict,
    output_affine,
    pattern_of,
    save_network,
)


def single_neuron():
    return NetworkSpec((
        Layer(np.array([[1.0]]), np.array([0.0]), "relu"),
        Layer(np.array([[1.0]]), np.array([0.0]), "linear"),
    ))


def test_forward_clamps_negative():
    net = single_neuron()
    y, trace = forward(net, [-2.0])
    assert y[0] == 0.0
    assert trace.pre[0][0] == -2.0
    assert trace.post[0][0] == 0.0


def test_forward_identity_positive():
    net = single_neuron()
    y, _ = forward(net, [3.0])
    assert y[0] == 3.0


def test_forward_toy_value(toy_net):
    y, trace = forward(toy_net, [2.5])
    assert y[0] == pytest.approx(0.5, abs=1e-12)
    # complementarity t * (t - a) = 0 on every ReLU neuron
    for li, layer in enumerate(toy_net.layers):
        if layer.activation == "relu":
            t, a = trace.post[li], trace.pre[li]
            assert np.all(t * (t - a) == 0.0)
            assert np.all(t == np.maximum(0.0, a))


def test_forward_rejects_dimension_mismatch(toy_net):
    with pytest.raises(InvalidInputError):
        forward(toy_net, [1.0, 2.0])


def test_loss_zero_residual():
    net = NetworkSpec((Layer(np.eye(2), np.zeros(2), "linear"),))
    x = np.array([0.3, -0.8])
    loss = LossSpec(x)
    g, grad = loss_and_gradient(net, loss, x)
    assert g == 0.0
    assert np.all(grad == 0.0)


def test_loss_gradient_hand_value(toy_net, toy_loss):
    g, grad = loss_and_gradient(toy_net, toy_loss, [2.5])
    assert g == pytest.approx(0.25, abs=1e-12)
    assert grad[0] == pytest.approx(-1.0, abs=1e-12)
    fd = fd_gradient(toy_net, toy_loss, [2.5])
    assert grad[0] == pytest.approx(fd[0], rel=1e-4)


def test_gradient_matches_fd_random_nets():
    rng = np.random.default_rng(21)
    for _ in range(15):
        net = random_relu_net(rng)
        loss = LossSpec(rng.uniform(size=net.output_dim))
        for x in sample_fd_safe_points(net, rng, 4, lo=-1.0, hi=1.0):
            _, grad = loss_and_gradient(net, loss, x)
            fd = fd_gradient(net, loss, x)
            denom = max(1.0, float(np.abs(grad).max()))
            assert float(np.abs(grad - fd).max()) / denom <= 1e-4


def test_zero_preactivation_counts_inactive():
    net = single_neuron()
    loss = LossSpec(np.array([-1.0]))
    # a = 0 at x = 0; inactive subgradient means derivative 0
    _, grad = loss_and_gradient(net, loss, [0.0])
    assert grad[0] == 0.0


def test_pattern_of_toy(toy_net):
    pat, bnd = pattern_of(toy_net, [2.5], 1e-6)
    assert sorted(pat.active) == [0, 1]
    assert not bnd.neurons
    pat3, bnd3 = pattern_of(toy_net, [3.0], 1e-6)
    assert sorted(bnd3.neurons) == [2]
    assert sorted(pat3.active) == [0, 1]


def test_pattern_boundary_empty_at_generic_points():
    rng = np.random.default_rng(4)
    net = random_relu_net(rng, arch=[2, 5, 3, 1])
    for _ in range(50):
        _, bnd = pattern_of(net, rng.uniform(-1, 1, 2), 0.0)
        assert not bnd.neurons


def test_pattern_equality_is_set_equality():
    a = ActivationPattern(frozenset({1, 2}), 4)
    b = ActivationPattern(frozenset({2, 1}), 4)
    assert a == b and hash(a) == hash(b)
    assert a != ActivationPattern(frozenset({1}), 4)


def test_gradient_in_pattern_matches_trace_interior(toy_net, toy_loss):
    pat, _ = pattern_of(toy_net, [2.5])
    grad_masked = gradient_in_pattern(toy_net, toy_loss, [2.5], pat)
    _, grad = loss_and_gradient(toy_net, toy_loss, [2.5])
    assert np.array_equal(grad_masked, grad)


def test_gradient_in_pattern_one_sided_at_knot(toy_net, toy_loss):
    left, _ = pattern_of(toy_net, [2.999])
    right, _ = pattern_of(toy_net, [3.001])
    gl = gradient_in_pattern(toy_net, toy_loss, [3.0], left)
    gr = gradient_in_pattern(toy_net, toy_loss, [3.0], right)
    # f(3) = 0, so both gradients vanish; the one-sided slopes show at 3 -/+ d
    d = 1e-6
    gl_off = gradient_in_pattern(toy_net, toy_loss, [3.0 - d], left)
    gr_off = gradient_in_pattern(toy_net, toy_loss, [3.0 + d], right)
    assert gl[0] == pytest.approx(0.0, abs=1e-12)
    assert gr[0] == pytest.approx(0.0, abs=1e-12)
    assert gl_off[0] == pytest.approx(-2 * d, rel=1e-3)  # 2 f f', f = d, f' = -1
    assert gr_off[0] == pytest.approx(2 * d, rel=1e-3)


def test_all_inactive_pattern_constant_network(toy_net, toy_loss):
    empty = ActivationPattern(frozenset(), toy_net.n_relu)
    grad = gradient_in_pattern(toy_net, toy_loss, [2.5], empty)
    assert np.all(grad == 0.0)


def test_masked_affine_first_layer_ignores_pattern(toy_net):
    for active in [frozenset(), frozenset({0, 1, 2, 3})]:
        pat = ActivationPattern(active, toy_net.n_relu)
        row, off = masked_affine(toy_net, pat, 2)
        assert row[0] == 1.0 and off == -3.0


def test_masked_affine_all_active_two_layer():
    rng = np.random.default_rng(12)
    w1 = rng.standard_normal((3, 2))
    b1 = rng.standard_normal(3)
    w2 = rng.standard_normal((2, 3))
    b2 = rng.standard_normal(2)
    net = NetworkSpec((Layer(w1, b1, "relu"), Layer(w2, b2, "linear")))
    pat = ActivationPattern(frozenset({0, 1, 2}), 3)
    row, off = masked_affine(net, pat, 3)  # first output neuron (global index 3)
    assert np.allclose(row, (w2 @ w1)[0], atol=1e-12)
    assert off == pytest.approx((w2 @ b1 + b2)[0], abs=1e-12)


def test_masked_affine_agrees_with_masked_forward():
    rng = np.random.default_rng(42)
    for _ in range(40):
        net = random_relu_net(rng)
        relu = list(net.relu_indices)
        active = frozenset(int(j) for j in relu if rng.random() < 0.5)
        pat = ActivationPattern(active, net.n_relu)
        x = rng.uniform(-1, 1, net.input_dim)
        _, trace = masked_forward(net, pat, x)
        for j in relu:
            li, row_i = net.locate(int(j))
            row, off = masked_affine(net, pat, int(j))
            assert float(row @ x + off) == pytest.approx(
                float(trace.pre[li][row_i]), abs=1e-10
            )


def test_output_affine_reproduces_forward_off_boundary():
    rng = np.random.default_rng(8)
    for _ in range(20):
        net = random_relu_net(rng, arch=[3, 6, 4, 2])
        x = rng.uniform(-1, 1, 3)
        pat, bnd = pattern_of(net, x, 1e-6)
        if bnd.neurons:
            continue
        mat, off = output_affine(net, pat)
        y, _ = forward(net, x)
        assert np.allclose(mat @ x + off, y, atol=1e-10)


def test_pattern_piecewise_constant():
    rng = np.random.default_rng(14)
    net = random_relu_net(rng, arch=[2, 4, 3, 1])
    x = rng.uniform(-1, 1, 2)
    pat, bnd = pattern_of(net, x, 1e-6)
    if not bnd.neurons:
        pat2, _ = pattern_of(net, x + 1e-12, 0.0)
        assert pat == pat2


def test_mse_nonnegative_and_zero_iff_target():
    rng = np.random.default_rng(6)
    net = random_relu_net(rng, arch=[2, 4, 2])
    loss = LossSpec(rng.uniform(size=2))
    for _ in range(30):
        g, _ = loss_and_gradient(net, loss, rng.uniform(-1, 1, 2))
        assert g >= 0.0
    y, _ = forward(net, rng.uniform(-1, 1, 2))
    g_exact = LossSpec(y).value(y)
    assert g_exact == 0.0


def test_model_file_roundtrip(tmp_path, toy_net):
    path = tmp_path / "model.json"
    save_network(toy_net, path)
    loaded = load_network(path)
    assert loaded.input_dim == toy_net.input_dim
    for a, b in zip(loaded.layers, toy_net.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
        assert a.activation == b.activation


def test_loader_rejects_nonfinite(tmp_path):
    data = {
        "input_dim": 1,
        "layers": [
            {"weights": [[float("nan")]], "bias": [0.0], "activation": "relu"},
            {"weights": [[1.0]], "bias": [0.0], "activation": "linear"},
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InvalidInputError):
        load_network(path)


def test_loader_rejects_structure_violations():
    with pytest.raises(InvalidInputError):
        network_from_dict({"input_dim": 1, "layers": []})
    with pytest.raises(InvalidInputError):  # final layer must be linear
        network_from_dict(
            {"input_dim": 1, "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "relu"}]}
        )
    with pytest.raises(InvalidInputError):  # adjacent dims must agree
        network_from_dict(
            {
                "input_dim": 1,
                "layers": [
                    {"weights": [[1.0]], "bias": [0.0], "activation": "relu"},
                    {"weights": [[1.0, 2.0]], "bias": [0.0], "activation": "linear"},
                ],
            }
        )
    with pytest.raises(InvalidInputError):  # declared input_dim must match
        network_from_dict(
            {"input_dim": 3, "layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "linear"}]}
        )


def test_neuron_indexing_increases_with_depth(toy_net):
    assert toy_net.offsets == (0, 4)
    assert list(toy_net.relu_indices) == [0, 1, 2, 3]
    assert toy_net.locate(4) == (1, 0)
    assert network_to_dict(toy_net)["input_dim"] == 1
