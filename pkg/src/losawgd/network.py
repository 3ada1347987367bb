"""
Dense regression network.
Rectifier hidden layers, a linear scalar output, and hand-written
backpropagation of the mean squared error to the parameters and the inputs.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass
class DenseNet:
    """Layer l maps activations of width sizes[l] to sizes[l + 1] by x @ weights[l] + biases[l]."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix, and at least one layer")
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {layer}: weight {w.shape} does not match bias {b.shape}")
            if layer and w.shape[0] != self.weights[layer - 1].shape[1]:
                raise ValueError(f"layer {layer} expects width {w.shape[0]}")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("the output layer must have width 1")

    @classmethod
    def initialize(cls, n_inputs: int, hidden: Sequence[int], rng: np.random.Generator) -> "DenseNet":
        """He-normal weights, zero biases."""
        sizes = [n_inputs, *hidden, 1]
        weights = [rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)) for fan_in, fan_out in zip(sizes, sizes[1:])]
        biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer; the arrays are live."""
        return [array for pair in zip(self.weights, self.biases) for array in pair]

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(array)) for array in self.parameters())

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # d loss / d x, one row per input row
    inputs: np.ndarray

    def parameters(self) -> list[np.ndarray]:
        return [array for pair in zip(self.weights, self.biases) for array in pair]


def _check_inputs(net: DenseNet, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.n_inputs:
        raise ValueError(f"network expects {net.n_inputs} inputs, got {x.shape[1]}")
    return x


def _activations(net: DenseNet, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Inputs to every layer and pre-activations of every layer."""
    inputs, pre = [x], []
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = inputs[-1] @ w + b
        pre.append(z)
        if layer < len(net.weights) - 1:
            inputs.append(np.maximum(z, 0.0))
    return inputs, pre


def _backpropagate(net, inputs, pre, delta):
    weight_grads = [np.empty(0)] * len(net.weights)
    bias_grads = [np.empty(0)] * len(net.weights)
    for layer in reversed(range(len(net.weights))):
        weight_grads[layer] = inputs[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        upstream = delta @ net.weights[layer].T
        if layer > 0:
            delta = upstream * (pre[layer - 1] > 0)
    return weight_grads, bias_grads, upstream


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Predictions, one per row of `x`."""
    x = _check_inputs(net, x)
    _, pre = _activations(net, x)
    return pre[-1][:, 0]


def backward(net: DenseNet, x: np.ndarray, y: np.ndarray) -> tuple[float, Gradients]:
    """Mean squared error on (x, y) and its gradients."""
    x = _check_inputs(net, x)
    y = np.asarray(y, dtype=float)
    inputs, pre = _activations(net, x)
    residual = pre[-1][:, 0] - y
    loss = float(np.mean(residual ** 2))
    delta = (2.0 / y.size) * residual[:, None]
    weight_grads, bias_grads, input_grads = _backpropagate(net, inputs, pre, delta)
    return loss, Gradients(weight_grads, bias_grads, input_grads)


def output_input_gradients(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """d f(x_i) / d x_i for every row i."""
    x = _check_inputs(net, x)
    inputs, pre = _activations(net, x)
    _, _, input_grads = _backpropagate(net, inputs, pre, np.ones((x.shape[0], 1)))
    return input_grads
