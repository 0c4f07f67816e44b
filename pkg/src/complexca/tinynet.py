"""A minimal dense network: forward pass, softmax cross-entropy, plain SGD.

Shared by the neural complexity predictor, the coarse-graining autoencoder and
the reservoir read-outs. Softmax layers may be *grouped*: a layer with
``groups=g`` applies an independent softmax to each of g equal chunks of its
output, which gives a multi-component classification head. Targets for a
grouped output layer are one class index per group.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Layer",
    "DenseNet",
    "TrainConfig",
    "init_net",
    "forward",
    "loss",
    "sgd_step",
    "train_sgd",
    "grad_check",
    "save_net",
    "load_net",
]

ACTIVATIONS = ("relu", "softmax", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"
    groups: int = 1

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight must be (out, in) and bias (out,)")
        if self.weight.shape[0] % self.groups:
            raise ValueError("output width must be divisible by groups")

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass
class DenseNet:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation, l.groups) for l in self.layers]
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.0
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    shuffle: bool = True
    tol: float | None = None  # stop once an epoch improves the loss by less than tol

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def init_net(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator,
             groups: Sequence[int] | None = None) -> DenseNet:
    """Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), zero biases."""
    if len(activations) != len(sizes) - 1:
        raise ValueError("need one activation per layer")
    groups = groups or [1] * len(activations)
    layers = []
    for n_in, n_out, act, g in zip(sizes[:-1], sizes[1:], activations, groups):
        bound = math.sqrt(1.0 / n_in)
        layers.append(Layer(rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out), act, g))
    return DenseNet(layers)


def _softmax(z: np.ndarray, groups: int) -> np.ndarray:
    shape = z.shape
    z = z.reshape(shape[:-1] + (groups, shape[-1] // groups))
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return (e / e.sum(axis=-1, keepdims=True)).reshape(shape)


def _activate(layer: Layer, z: np.ndarray) -> np.ndarray:
    if layer.activation == "relu":
        return np.maximum(z, 0.0)
    if layer.activation == "softmax":
        return _softmax(z, layer.groups)
    return z


def _forward_all(net: DenseNet, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    for layer in net.layers:
        acts.append(_activate(layer, acts[-1] @ layer.weight.T + layer.bias))
    return acts


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise ValueError(f"input width {x.shape[-1]} != network input {net.n_in}")
    return _forward_all(net, x)[-1]


def _targets_2d(net: DenseNet, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[:, None]
    groups = net.layers[-1].groups
    if y.shape[1] != groups:
        raise ValueError(f"expected {groups} target component(s) per example")
    width = net.layers[-1].n_out // groups
    if y.size and (y.min() < 0 or y.max() >= width):
        raise ValueError("target class index out of range")
    return y


def _log_probs(net: DenseNet, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass returning activations and stable log-softmax of the last layer."""
    last = net.layers[-1]
    if last.activation != "softmax":
        raise ValueError("cross-entropy needs a softmax output layer")
    acts = [x]
    for layer in net.layers[:-1]:
        acts.append(_activate(layer, acts[-1] @ layer.weight.T + layer.bias))
    z = acts[-1] @ last.weight.T + last.bias
    g = last.groups
    z = z.reshape(z.shape[0], g, -1)
    z = z - z.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    acts.append(np.exp(logp).reshape(z.shape[0], -1))
    return acts, logp


def loss(net: DenseNet, x, y) -> float:
    """Mean over examples of the summed per-component cross-entropy."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _targets_2d(net, y)
    _, logp = _log_probs(net, x)
    picked = np.take_along_axis(logp, y[:, :, None], axis=-1)[..., 0]
    return float(-picked.sum(axis=1).mean())


def _gradients(net: DenseNet, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    acts, logp = _log_probs(net, x)
    n = x.shape[0]
    picked = np.take_along_axis(logp, y[:, :, None], axis=-1)[..., 0]
    value = float(-picked.sum(axis=1).mean())
    probs = np.exp(logp)
    np.put_along_axis(probs, y[:, :, None], np.take_along_axis(probs, y[:, :, None], axis=-1) - 1.0, axis=-1)
    delta = probs.reshape(n, -1) / n  # dL/dz of the output layer
    grads: list[np.ndarray] = []
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads = [delta.T @ acts[i], delta.sum(axis=0)] + grads
        if i == 0:
            break
        da = delta @ layer.weight
        below = net.layers[i - 1]
        a = acts[i]
        if below.activation == "relu":
            delta = da * (a > 0)
        elif below.activation == "softmax":
            g = below.groups
            a3 = a.reshape(n, g, -1)
            da3 = da.reshape(n, g, -1)
            delta = (a3 * (da3 - (a3 * da3).sum(axis=-1, keepdims=True))).reshape(n, -1)
        else:
            delta = da
    return value, grads


def _apply(params, value, grads, lr, wd):
    for p, g in zip(params, grads):
        if wd:
            p *= 1.0 - lr * wd
        p -= lr * g
    return value


def sgd_step(net: DenseNet, x, y, learning_rate: float, weight_decay: float = 0.0) -> float:
    """One in-place SGD update on a batch; returns the batch loss before the update."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return _apply(net.params(), *_gradients(net, x, _targets_2d(net, y)), learning_rate, weight_decay)


def train_sgd(net: DenseNet, x, y, cfg: TrainConfig) -> tuple[DenseNet, list[float]]:
    """Mini-batch SGD on cross-entropy + weight_decay * 0.5 * ||theta||^2.

    Trains a copy of ``net``; returns it with the per-epoch mean batch loss.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _targets_2d(net, y)
    if x.shape[0] == 0:
        raise ValueError("empty dataset")
    if x.shape[0] != y.shape[0]:
        raise ValueError("inputs and targets differ in length")
    net = net.copy()
    params = net.params()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    lr, wd = cfg.learning_rate, cfg.weight_decay
    n = x.shape[0]
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            total += _apply(params, *_gradients(net, x[idx], y[idx]), lr, wd)
            batches += 1
        trace.append(total / batches)
        if cfg.tol is not None and len(trace) > 1 and trace[-2] - trace[-1] < cfg.tol:
            break
    return net, trace


def grad_check(net: DenseNet, x, target, h: float = 1e-4) -> float:
    """Max relative error between backprop and central finite differences."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(target, dtype=np.int64)
    if y.ndim == 0:
        y = np.full(x.shape[0], int(y))
    elif y.ndim == 1 and x.shape[0] == 1 and net.layers[-1].groups > 1:
        y = y[None, :]
    y = _targets_2d(net, y)
    _, grads = _gradients(net, x, y)
    worst = 0.0
    for p, g in zip(net.params(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            up = loss(net, x, y)
            flat[j] = old - h
            down = loss(net, x, y)
            flat[j] = old
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(gflat[j]), 1e-8)
            worst = max(worst, abs(numeric - gflat[j]) / denom)
    return worst


def save_net(net: DenseNet, path: str | Path) -> None:
    """JSON checkpoint: layer shapes, activations and row-major weights."""
    doc = {
        "format": "complexca.densenet/1",
        "layers": [
            {
                "shape": list(l.weight.shape),
                "activation": l.activation,
                "groups": l.groups,
                "weight": l.weight.ravel().tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_net(path: str | Path) -> DenseNet:
    doc = json.loads(Path(path).read_text())
    layers = []
    for spec in doc["layers"]:
        w = np.array(spec["weight"], dtype=np.float64).reshape(spec["shape"])
        layers.append(Layer(w, np.array(spec["bias"]), spec["activation"], spec.get("groups", 1)))
    return DenseNet(layers)
