"""Network container, the three supervised architectures, Adam and training."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InputShapeError, TrainingDivergedError
from ..numerics import RngStream, derive_stream_id
from .layers import (
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2x2,
    PruneMask,
    ReLU,
    Rescale,
)

N_FEATURES = 56
GRID = 50


class Network:
    """An ordered list of layers; the first may be a ``Concat`` taking a tuple input."""

    def __init__(self, layers, name="network"):
        self.layers: list[Layer] = list(layers)
        self.name = name
        for seq in self._input_sequences():
            for layer in seq:
                if isinstance(layer, Conv2D):
                    layer.input_grad = False
                if not isinstance(layer, Rescale):
                    break

    def _input_sequences(self):
        seqs, first = [], self.layers[0]
        if isinstance(first, Concat):
            seqs.extend(first.branches)
        else:
            seqs.append(self.layers)
        return seqs

    # -- structure -----------------------------------------------------------

    def walk(self):
        """Every layer, depth first, in a fixed order."""
        def _walk(seq):
            for layer in seq:
                yield layer
                if isinstance(layer, Concat):
                    for branch in layer.branches:
                        yield from _walk(branch)
        return list(_walk(self.layers))

    def sequences(self):
        seqs = [self.layers]
        for layer in self.walk():
            if isinstance(layer, Concat):
                seqs.extend(layer.branches)
        return seqs

    def architecture(self):
        return [layer.spec() for layer in self.layers]

    def parameters(self):
        """(layer, name) pairs of trainable arrays in a stable order."""
        return [(layer, key) for layer in self.walk() for key in sorted(layer.params)]

    def state_arrays(self):
        return [(layer, key) for layer in self.walk() for key in sorted(layer.state)]

    def dense_layers(self):
        return [layer for layer in self.walk() if isinstance(layer, Dense)]

    def n_params(self) -> int:
        return int(sum(layer.params[key].size for layer, key in self.parameters()))

    def init(self, seed: int) -> "Network":
        """He-uniform weights, zero biases, all derived from ``seed``."""
        base = RngStream(seed, derive_stream_id("init"))
        for i, layer in enumerate(self.walk()):
            layer.init_params(base.child(i))
            if isinstance(layer, Dense):
                layer.mask = None
        return self

    def set_dropout_stream(self, rng: RngStream):
        for i, layer in enumerate(self.walk()):
            if isinstance(layer, Dropout):
                layer.rng = rng.child("dropout", i)

    # -- computation ---------------------------------------------------------

    def forward(self, x, training=False):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            if grad is None:
                break
            grad = layer.backward(grad)
        return grad

    def predict(self, inputs, batch_size=256) -> np.ndarray:
        """Raw network outputs in inference mode, shape (N,)."""
        inputs = self._check_inputs(inputs)
        n = _length(inputs)
        out = np.empty(n)
        for s in range(0, n, batch_size):
            idx = slice(s, s + batch_size)
            out[idx] = self.forward(_take(inputs, idx), training=False)[:, 0]
        return out

    def _check_inputs(self, inputs):
        first = self.layers[0]
        if isinstance(first, Concat):
            if not isinstance(inputs, (tuple, list)) or len(inputs) != len(first.branches):
                raise InputShapeError(f"{self.name} expects a tuple of {len(first.branches)} arrays")
            inputs = tuple(np.asarray(a, dtype=float) for a in inputs)
            expected = self.input_shapes()
            for a, shape in zip(inputs, expected):
                if a.shape[1:] != shape:
                    raise InputShapeError(f"{self.name}: expected (N, {shape}), got {a.shape}")
            if len({a.shape[0] for a in inputs}) != 1:
                raise InputShapeError("all inputs must hold the same number of rows")
            return inputs
        a = np.asarray(inputs, dtype=float)
        shape = self.input_shapes()
        if a.shape[1:] != shape:
            raise InputShapeError(f"{self.name}: expected (N, {shape}), got {a.shape}")
        return a

    def input_shapes(self):
        def seq_shape(seq):
            layer = next(l for l in seq if isinstance(l, (Dense, Conv2D, Concat)))
            if isinstance(layer, Dense):
                return (layer.n_in,)
            if isinstance(layer, Conv2D):
                return (GRID, GRID, layer.in_channels)
            return tuple(seq_shape(b) for b in layer.branches)
        return seq_shape(self.layers)

    # -- pruning -------------------------------------------------------------

    def prune(self):
        """Zero the smallest-magnitude weights of each dense layer before a PruneMask."""
        for seq in self.sequences():
            last_dense = None
            for layer in seq:
                if isinstance(layer, Dense):
                    last_dense = layer
                elif isinstance(layer, PruneMask):
                    if last_dense is None:
                        raise ValueError("prune mask without a preceding dense layer")
                    w = last_dense.params["W"]
                    n_drop = int(math.floor(layer.fraction * w.size))
                    order = np.argsort(np.abs(w).ravel(), kind="stable")
                    mask = np.ones(w.size)
                    mask[order[:n_drop]] = 0.0
                    last_dense.mask = mask.reshape(w.shape)
                    last_dense.params["W"] = w * last_dense.mask

    @property
    def pruned(self) -> bool:
        return any(d.mask is not None for d in self.dense_layers())


def _length(inputs):
    return (inputs[0] if isinstance(inputs, tuple) else inputs).shape[0]


def _take(inputs, idx):
    if isinstance(inputs, tuple):
        return tuple(a[idx] for a in inputs)
    return inputs[idx]


# ---------------------------------------------------------------------------
# architectures
# ---------------------------------------------------------------------------


def _features_trunk():
    return [
        Dense(N_FEATURES, 32), ReLU(),
        Dense(32, 32), ReLU(),
        Dense(32, 32), PruneMask(0.25), ReLU(),
    ]


def _heatmap_trunk():
    return [
        Rescale(1.0),
        Conv2D(1, 16, 9), ReLU(),
        Conv2D(16, 16, 9), ReLU(),
        BatchNorm(16),
        MaxPool2x2(),
        Dropout(0.25),
        Conv2D(16, 16, 3), ReLU(),
        MaxPool2x2(),
        Flatten(),
        Dropout(0.5),
        Dense(12 * 12 * 16, 32), ReLU(),
        Dropout(0.25),
        Dense(32, 32), ReLU(),
    ]


def build_model1(seed: int = 0) -> Network:
    """Handcrafted features -> three 32-node dense layers (last one pruned) -> 1."""
    return Network(_features_trunk() + [Dense(32, 1)], name="model1").init(seed)


def build_model2(seed: int = 0) -> Network:
    """50x50 heatmap -> convolutional trunk -> 1."""
    return Network(_heatmap_trunk() + [Dense(32, 1)], name="model2").init(seed)


def build_model3(seed: int = 0) -> Network:
    """Heatmap trunk and feature trunk, concatenated, then four dense layers."""
    head = []
    width = 64
    for _ in range(4):
        head += [Dense(width, 32), ReLU()]
        width = 32
    layers = [Concat([_heatmap_trunk(), _features_trunk()])] + head + [Dense(32, 1)]
    return Network(layers, name="model3").init(seed)


BUILDERS = {"model1": build_model1, "model2": build_model2, "model3": build_model3}


# ---------------------------------------------------------------------------
# optimisation
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr, self.eps = lr, eps
        self.b1, self.b2 = betas
        self.t = 0
        self.m = [np.zeros_like(layer.params[key]) for layer, key in params]
        self.v = [np.zeros_like(layer.params[key]) for layer, key in params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i, (layer, key) in enumerate(self.params):
            g = layer.grads[key]
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            step = self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p = layer.params[key] - step
            mask = getattr(layer, "mask", None)
            if key == "W" and mask is not None:
                p = p * mask
                self.m[i] *= mask
                self.v[i] *= mask
            layer.params[key] = p


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 1000
    learning_rate: float = 1e-3
    seed: int = 0
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def train(model: Network, inputs, targets, cfg: TrainConfig, validation=None, log=None):
    """Mini-batch Adam on mean squared error.

    ``validation`` is an optional ``(inputs, targets)`` pair scored after
    every epoch. Pruning happens once, at the end of epoch
    ``ceil(epochs / 2)``. Returns ``(model, history)`` where history holds
    one dict per epoch.
    """
    inputs = model._check_inputs(inputs)
    targets = np.asarray(targets, dtype=float).ravel()
    n = _length(inputs)
    if targets.size != n:
        raise InputShapeError("number of targets does not match number of inputs")
    if validation is not None:
        validation = (model._check_inputs(validation[0]), np.asarray(validation[1], dtype=float).ravel())
    shuffle = RngStream(cfg.seed, derive_stream_id("shuffle"))
    model.set_dropout_stream(RngStream(cfg.seed, derive_stream_id("dropout")))
    opt = Adam(model.parameters(), cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    prune_epoch = math.ceil(cfg.epochs / 2)
    has_prune = any(isinstance(l, PruneMask) for l in model.walk())
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            pred = model.forward(_take(inputs, idx), training=True)[:, 0]
            resid = pred - targets[idx]
            loss = float(np.mean(resid * resid))
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss in epoch {epoch}", epoch=epoch)
            model.backward((2.0 / idx.size) * resid[:, None])
            opt.step()
            total += loss * idx.size
        if has_prune and epoch == prune_epoch and not model.pruned:
            model.prune()
        row = {"epoch": epoch, "train_loss": total / n}
        if validation is not None:
            vp = model.predict(validation[0])
            row["val_loss"] = float(np.mean((vp - validation[1]) ** 2))
        history.append(row)
        if log is not None:
            log(row)
    return model, history


def predict_linfoot(model: Network, inputs) -> np.ndarray:
    """Inference-mode predictions clamped to [0, 1]."""
    return np.clip(model.predict(inputs), 0.0, 1.0)
