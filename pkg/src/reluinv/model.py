"""Layered ReLU networks: evaluation, gradients, activation patterns, masked affine algebra."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

ACT_RELU = "relu"
ACT_LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray  # (n_out, n_in), row i holds the incoming weights of neuron i
    bias: np.ndarray  # (n_out,)
    activation: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise InvalidInputError(f"layer shape mismatch: weights {w.shape}, bias {b.shape}")
        if self.activation not in (ACT_RELU, ACT_LINEAR):
            raise InvalidInputError(f"unsupported activation {self.activation!r}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise InvalidInputError("non-finite layer parameters")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Immutable feed-forward network. Hidden/output neurons get global indices in layer order."""

    layers: tuple[Layer, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)
    relu_indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InvalidInputError("network needs at least one layer")
        for prev, cur in zip(layers, layers[1:]):
            if cur.n_in != prev.n_out:
                raise InvalidInputError(
                    f"adjacent layer dimensions disagree: {prev.n_out} -> {cur.n_in}"
                )
        if layers[-1].activation != ACT_LINEAR:
            raise InvalidInputError("final layer must be linear")
        offsets = []
        total = 0
        relu = []
        for layer in layers:
            offsets.append(total)
            if layer.activation == ACT_RELU:
                relu.extend(range(total, total + layer.n_out))
            total += layer.n_out
        relu_arr = np.asarray(relu, dtype=int)
        relu_arr.flags.writeable = False
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "offsets", tuple(offsets))
        object.__setattr__(self, "relu_indices", relu_arr)

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def n_relu(self) -> int:
        return int(self.relu_indices.size)

    @property
    def total_neurons(self) -> int:
        return self.offsets[-1] + self.layers[-1].n_out

    def locate(self, neuron: int) -> tuple[int, int]:
        """Map a global neuron index to (layer index, row within layer)."""
        if not 0 <= neuron < self.total_neurons:
            raise InvalidInputError(f"neuron index {neuron} out of range")
        for li in range(len(self.layers) - 1, -1, -1):
            if neuron >= self.offsets[li]:
                return li, neuron - self.offsets[li]
        raise InvalidInputError(f"neuron index {neuron} out of range")

    def is_relu_neuron(self, neuron: int) -> bool:
        li, _ = self.locate(neuron)
        return self.layers[li].activation == ACT_RELU


@dataclass(frozen=True, eq=False)
class ActivationPattern:
    """Set of ReLU neurons treated as active; fixes the network to one affine piece."""

    active: frozenset[int]
    n_relu: int

    def __post_init__(self):
        object.__setattr__(self, "active", frozenset(self.active))

    def __eq__(self, other):
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return self.active == other.active

    def __hash__(self):
        return hash(self.active)

    def with_neuron(self, neuron: int, on: bool) -> "ActivationPattern":
        active = self.active | {neuron} if on else self.active - {neuron}
        return ActivationPattern(active, self.n_relu)


@dataclass(frozen=True)
class BoundarySet:
    """ReLU neurons whose pre-activation magnitude is within the tolerance."""

    neurons: frozenset[int]
    tolerance: float

    def __post_init__(self):
        if self.tolerance < 0:
            raise InvalidInputError("boundary tolerance must be nonnegative")
        object.__setattr__(self, "neurons", frozenset(self.neurons))

    def __bool__(self):
        return bool(self.neurons)


@dataclass(frozen=True, eq=False)
class EvalTrace:
    """Per-layer pre/post activations from a forward pass."""

    pre: tuple[np.ndarray, ...]
    post: tuple[np.ndarray, ...]
    output: np.ndarray

    def relu_pre(self, net: NetworkSpec) -> np.ndarray:
        """Flat pre-activation vector aligned with net.relu_indices."""
        parts = [
            self.pre[li]
            for li, layer in enumerate(net.layers)
            if layer.activation == ACT_RELU
        ]
        if not parts:
            return np.empty(0)
        return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class LossSpec:
    """Convex differentiable loss against a fixed target; only MSE is built in."""

    target: np.ndarray
    kind: str = "mse"

    def __post_init__(self):
        t = np.asarray(self.target, dtype=float).reshape(-1)
        if not np.isfinite(t).all():
            raise InvalidInputError("non-finite loss target")
        if self.kind != "mse":
            raise InvalidInputError(f"unsupported loss kind {self.kind!r}")
        t.flags.writeable = False
        object.__setattr__(self, "target", t)

    def value(self, y: np.ndarray) -> float:
        r = np.asarray(y, dtype=float).reshape(-1) - self.target
        return float(r @ r) / self.target.size

    def grad_output(self, y: np.ndarray) -> np.ndarray:
        r = np.asarray(y, dtype=float).reshape(-1) - self.target
        return 2.0 * r / self.target.size


def _check_input(net: NetworkSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.input_dim:
        raise InvalidInputError(f"input has dim {x.size}, expected {net.input_dim}")
    return x


def forward(net: NetworkSpec, x) -> tuple[np.ndarray, EvalTrace]:
    """Evaluate the network, returning the output and per-layer pre/post activations."""
    t = _check_input(net, x)
    pre, post = [], []
    for layer in net.layers:
        a = layer.weights @ t + layer.bias
        t = np.maximum(0.0, a) if layer.activation == ACT_RELU else a
        pre.append(a)
        post.append(t)
    return post[-1], EvalTrace(tuple(pre), tuple(post), post[-1])


def evaluate_batch(net: NetworkSpec, xs: np.ndarray) -> np.ndarray:
    """Row-wise forward pass without traces; xs has shape (k, input_dim)."""
    t = np.asarray(xs, dtype=float)
    if t.ndim != 2 or t.shape[1] != net.input_dim:
        raise InvalidInputError(f"batch shape {t.shape} incompatible with input dim {net.input_dim}")
    for layer in net.layers:
        a = t @ layer.weights.T + layer.bias
        t = np.maximum(0.0, a) if layer.activation == ACT_RELU else a
    return t


def loss_values_batch(loss: LossSpec, ys: np.ndarray) -> np.ndarray:
    r = np.asarray(ys, dtype=float) - loss.target
    return np.einsum("ij,ij->i", r, r) / loss.target.size


def pattern_of(net: NetworkSpec, x, tau: float = 1e-6) -> tuple[ActivationPattern, BoundarySet]:
    """Activation pattern {a_j > tau} and boundary set {|a_j| <= tau} at x."""
    if tau < 0:
        raise InvalidInputError("tau must be nonnegative")
    _, trace = forward(net, x)
    pre = trace.relu_pre(net)
    idx = net.relu_indices
    active = frozenset(int(j) for j in idx[pre > tau])
    boundary = frozenset(int(j) for j in idx[np.abs(pre) <= tau])
    return ActivationPattern(active, net.n_relu), BoundarySet(boundary, tau)


def _layer_masks(net: NetworkSpec, pattern: ActivationPattern) -> list[np.ndarray | None]:
    """Per-layer 0/1 activation masks; None marks linear layers (no masking)."""
    masks: list[np.ndarray | None] = []
    for li, layer in enumerate(net.layers):
        if layer.activation != ACT_RELU:
            masks.append(None)
            continue
        off = net.offsets[li]
        mask = np.fromiter(
            ((off + i) in pattern.active for i in range(layer.n_out)),
            dtype=float,
            count=layer.n_out,
        )
        masks.append(mask)
    return masks


def _backward(net: NetworkSpec, masks: list[np.ndarray | None], grad_out: np.ndarray) -> np.ndarray:
    delta = grad_out
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        if masks[li] is not None:
            delta = delta * masks[li]
        delta = layer.weights.T @ delta
    return delta


def loss_and_gradient(net: NetworkSpec, loss: LossSpec, x) -> tuple[float, np.ndarray]:
    """Loss value and reverse-mode input gradient; neurons at exactly zero count as inactive."""
    y, trace = forward(net, x)
    if loss.target.size != net.output_dim:
        raise InvalidInputError("loss target dimension does not match network output")
    masks: list[np.ndarray | None] = []
    for li, layer in enumerate(net.layers):
        masks.append((trace.pre[li] > 0.0).astype(float) if layer.activation == ACT_RELU else None)
    return loss.value(y), _backward(net, masks, loss.grad_output(y))


def masked_forward(net: NetworkSpec, pattern: ActivationPattern, x) -> tuple[np.ndarray, EvalTrace]:
    """Forward pass with the ReLU max replaced by the pattern's fixed 0/1 masks."""
    t = _check_input(net, x)
    masks = _layer_masks(net, pattern)
    pre, post = [], []
    for li, layer in enumerate(net.layers):
        a = layer.weights @ t + layer.bias
        t = a * masks[li] if masks[li] is not None else a
        pre.append(a)
        post.append(t)
    return post[-1], EvalTrace(tuple(pre), tuple(post), post[-1])


def loss_and_gradient_in_pattern(
    net: NetworkSpec, loss: LossSpec, x, pattern: ActivationPattern
) -> tuple[float, np.ndarray]:
    """Loss and gradient of the affine piece selected by `pattern`, evaluated at x."""
    if loss.target.size != net.output_dim:
        raise InvalidInputError("loss target dimension does not match network output")
    y, _ = masked_forward(net, pattern, x)
    masks = _layer_masks(net, pattern)
    return loss.value(y), _backward(net, masks, loss.grad_output(y))


def gradient_in_pattern(net: NetworkSpec, loss: LossSpec, x, pattern: ActivationPattern) -> np.ndarray:
    return loss_and_gradient_in_pattern(net, loss, x, pattern)[1]


def affine_by_layer(net: NetworkSpec, pattern: ActivationPattern):
    """Yield (layer index, rows, offsets): each layer's pre-activation as an affine map of x.

    Masks of all earlier layers come from `pattern`; the yielded layer itself is unmasked.
    """
    masks = _layer_masks(net, pattern)
    mat = np.eye(net.input_dim)
    off = np.zeros(net.input_dim)
    for li, layer in enumerate(net.layers):
        rows = layer.weights @ mat
        offs = layer.weights @ off + layer.bias
        yield li, rows, offs
        if masks[li] is not None:
            rows = rows * masks[li][:, None]
            offs = offs * masks[li]
        mat, off = rows, offs


def masked_affine(net: NetworkSpec, pattern: ActivationPattern, neuron: int) -> tuple[np.ndarray, float]:
    """Affine form (row, offset) of a neuron's pre-activation with earlier layers masked by `pattern`."""
    li, row_idx = net.locate(neuron)
    for lj, rows, offs in affine_by_layer(net, pattern):
        if lj == li:
            return rows[row_idx].copy(), float(offs[row_idx])
    raise InvalidInputError(f"neuron {neuron} not reached")  # pragma: no cover


def output_affine(net: NetworkSpec, pattern: ActivationPattern) -> tuple[np.ndarray, np.ndarray]:
    """Affine map (matrix, offset) from input to output under the pattern's masks."""
    last = len(net.layers) - 1
    for li, rows, offs in affine_by_layer(net, pattern):
        if li == last:
            return rows, offs
    raise InvalidInputError("empty network")  # pragma: no cover


def network_to_dict(net: NetworkSpec) -> dict:
    return {
        "input_dim": net.input_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(data: dict) -> NetworkSpec:
    try:
        input_dim = int(data["input_dim"])
        raw_layers = data["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed model object: {exc}") from exc
    if not isinstance(raw_layers, list) or not raw_layers:
        raise InvalidInputError("model must declare a nonempty layer list")
    layers = []
    for i, entry in enumerate(raw_layers):
        try:
            w = np.asarray(entry["weights"], dtype=float)
            b = np.asarray(entry["bias"], dtype=float)
            act = entry["activation"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed layer {i}: {exc}") from exc
        layers.append(Layer(w, b, act))
    net = NetworkSpec(tuple(layers))
    if net.input_dim != input_dim:
        raise InvalidInputError(
            f"declared input_dim {input_dim} does not match first layer ({net.input_dim})"
        )
    return net


def load_network(path: str | Path) -> NetworkSpec:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def save_network(net: NetworkSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh)
