"""Layers with hand-written forward and backward passes.

Arrays are float64. Images use NHWC layout. Every layer exposes

* ``forward(x, training)`` caching what ``backward`` needs,
* ``backward(grad)`` returning the input gradient and filling ``grads``,
* ``params`` / ``grads`` (trainable) and ``state`` (saved, not trained),
* ``spec()``, the JSON-able description used by the model file format.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import fft as sfft

from ..errors import InputShapeError


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}

    def spec(self) -> dict:
        return {"kind": self.kind}

    def init_params(self, rng) -> None:
        pass

    def output_shape(self, shape):
        return shape

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def sublayers(self):
        return ()


def _he_uniform(rng, fan_in, shape):
    limit = math.sqrt(6.0 / fan_in)
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


class Dense(Layer):
    """Affine map ``x @ W + b``; ``mask`` (if set) pins weights to zero."""

    kind = "dense"

    def __init__(self, n_in, n_out):
        super().__init__()
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.params = {"W": np.zeros((self.n_in, self.n_out)), "b": np.zeros(self.n_out)}
        self.mask: np.ndarray | None = None

    def spec(self):
        return {"kind": self.kind, "n_in": self.n_in, "n_out": self.n_out}

    def init_params(self, rng):
        self.params["W"] = _he_uniform(rng, self.n_in, (self.n_in, self.n_out))
        self.params["b"] = np.zeros(self.n_out)

    def output_shape(self, shape):
        if shape[-1] != self.n_in:
            raise InputShapeError(f"dense layer expects width {self.n_in}, got {shape[-1]}")
        return (self.n_out,)

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise InputShapeError(f"dense layer expects (N, {self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        gw = self._x.T @ grad
        if self.mask is not None:
            gw = gw * self.mask
        self.grads = {"W": gw, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False):
        self._pos = x > 0
        return np.where(self._pos, x, 0.0)

    def backward(self, grad):
        return np.where(self._pos, grad, 0.0)


class Rescale(Layer):
    kind = "rescale"

    def __init__(self, scale=1.0):
        super().__init__()
        self.scale = float(scale)

    def spec(self):
        return {"kind": self.kind, "scale": self.scale}

    def forward(self, x, training=False):
        return x * self.scale

    def backward(self, grad):
        return grad * self.scale


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Dropout(Layer):
    """Inverted dropout: scaled by ``1/(1-rate)`` in training, identity otherwise."""

    kind = "dropout"

    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = float(rate)
        self.rng = None

    def spec(self):
        return {"kind": self.kind, "rate": self.rate}

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._keep = None
            return x
        if self.rng is None:
            raise RuntimeError("dropout needs a random stream in training mode")
        self._keep = (self.rng.uniform(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._keep

    def backward(self, grad):
        return grad if self._keep is None else grad * self._keep


class PruneMask(Layer):
    """Marks the preceding dense layer for one-shot magnitude pruning.

    Identity in the forward pass; ``Network.prune`` zeroes the requested
    fraction of that layer's smallest-magnitude weights and freezes them.
    """

    kind = "prune_mask"

    def __init__(self, fraction):
        super().__init__()
        self.fraction = float(fraction)

    def spec(self):
        return {"kind": self.kind, "fraction": self.fraction}

    def forward(self, x, training=False):
        return x

    def backward(self, grad):
        return grad


def _fft_size(h, w, k):
    # large enough that circular wrap-around never reaches the cropped output
    return (sfft.next_fast_len(h + k - 1, real=True), sfft.next_fast_len(w + k - 1, real=True))


class Conv2D(Layer):
    """Stride-1 cross-correlation with zero 'same' padding (odd kernels only).

    Forward and backward passes run in the frequency domain: with the input
    zero-padded to a grid that avoids wrap-around, correlation becomes a
    per-frequency channel-mixing matrix product.
    """

    kind = "conv2d"

    def __init__(self, in_channels, filters, kernel):
        super().__init__()
        if kernel % 2 != 1:
            raise ValueError("'same' padding needs an odd kernel size")
        self.in_channels, self.filters, self.kernel = int(in_channels), int(filters), int(kernel)
        k = self.kernel
        self.params = {"W": np.zeros((k, k, self.in_channels, self.filters)), "b": np.zeros(self.filters)}
        # the first layer of a network has no use for its input gradient
        self.input_grad = True

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "filters": self.filters, "kernel": self.kernel}

    def init_params(self, rng):
        k = self.kernel
        fan_in = k * k * self.in_channels
        self.params["W"] = _he_uniform(rng, fan_in, self.params["W"].shape)
        self.params["b"] = np.zeros(self.filters)

    def output_shape(self, shape):
        if len(shape) != 3 or shape[-1] != self.in_channels:
            raise InputShapeError(f"conv expects (H, W, {self.in_channels}), got {shape}")
        return shape[:2] + (self.filters,)

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[-1] != self.in_channels:
            raise InputShapeError(f"conv expects (N, H, W, {self.in_channels}), got {x.shape}")
        n, h, w, cin = x.shape
        k, p = self.kernel, self.kernel // 2
        size = _fft_size(h, w, k)
        xp = np.zeros((n,) + size + (cin,))
        xp[:, p:p + h, p:p + w] = x
        xf = sfft.rfft2(xp, axes=(1, 2))
        fshape = xf.shape[1:3]
        # (frequency, sample, channel) so that matmul mixes channels per frequency
        xf = xf.reshape(n, -1, cin).transpose(1, 0, 2)
        wf = sfft.rfft2(self.params["W"], s=size, axes=(0, 1)).reshape(-1, cin, self.filters)
        out = np.matmul(xf, wf.conj()).transpose(1, 0, 2).reshape((n,) + fshape + (self.filters,))
        self._cache = (xf, wf, x.shape, size, fshape)
        return sfft.irfft2(out, s=size, axes=(1, 2))[:, :h, :w] + self.params["b"]

    def backward(self, grad):
        xf, wf, xshape, size, fshape = self._cache
        n, h, w, cin = xshape
        k, p = self.kernel, self.kernel // 2
        gf = sfft.rfft2(grad, s=size, axes=(1, 2)).reshape(n, -1, self.filters).transpose(1, 0, 2)
        gw = np.matmul(xf.transpose(0, 2, 1), gf.conj()).reshape(fshape + (cin, self.filters))
        self.grads = {
            "W": sfft.irfft2(gw, s=size, axes=(0, 1))[:k, :k],
            "b": grad.sum(axis=(0, 1, 2)),
        }
        if not self.input_grad:
            return None
        gx = np.matmul(gf, wf.transpose(0, 2, 1)).transpose(1, 0, 2).reshape((n,) + fshape + (cin,))
        return sfft.irfft2(gx, s=size, axes=(1, 2))[:, p:p + h, p:p + w]


class BatchNorm(Layer):
    """Per-channel normalisation over every axis but the last."""

    kind = "batchnorm"

    def __init__(self, channels, momentum=0.99, eps=1e-3):
        super().__init__()
        self.channels = int(channels)
        self.momentum, self.eps = float(momentum), float(eps)
        self.params = {"gamma": np.ones(self.channels), "beta": np.zeros(self.channels)}
        self.state = {"mean": np.zeros(self.channels), "var": np.ones(self.channels)}

    def spec(self):
        return {"kind": self.kind, "channels": self.channels,
                "momentum": self.momentum, "eps": self.eps}

    def init_params(self, rng):
        self.params = {"gamma": np.ones(self.channels), "beta": np.zeros(self.channels)}
        self.state = {"mean": np.zeros(self.channels), "var": np.ones(self.channels)}

    def forward(self, x, training=False):
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.state["mean"] = m * self.state["mean"] + (1.0 - m) * mean
            self.state["var"] = m * self.state["var"] + (1.0 - m) * var
        else:
            mean, var = self.state["mean"], self.state["var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, axes, training)
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, grad):
        xhat, inv, axes, training = self._cache
        gamma = self.params["gamma"]
        self.grads = {"gamma": (grad * xhat).sum(axis=axes), "beta": grad.sum(axis=axes)}
        if not training:
            return grad * gamma * inv
        m = np.prod([grad.shape[a] for a in axes])
        gx = grad * gamma
        return inv / m * (m * gx - gx.sum(axis=axes) - xhat * (gx * xhat).sum(axis=axes))


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; odd trailing rows/columns are dropped."""

    kind = "maxpool2x2"

    def output_shape(self, shape):
        return (shape[0] // 2, shape[1] // 2, shape[2])

    def forward(self, x, training=False):
        n, h, w, c = x.shape
        h2, w2 = h // 2, w // 2
        blocks = x[:, : 2 * h2, : 2 * w2, :].reshape(n, h2, 2, w2, 2, c)
        blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, 4)
        self._arg = blocks.argmax(axis=-1)
        self._shape = x.shape
        return np.take_along_axis(blocks, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, h, w, c = self._shape
        h2, w2 = h // 2, w // 2
        onehot = np.zeros((n, h2, w2, c, 4))
        np.put_along_axis(onehot, self._arg[..., None], grad[..., None], axis=-1)
        blocks = onehot.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        out = np.zeros(self._shape)
        out[:, : 2 * h2, : 2 * w2, :] = blocks.reshape(n, 2 * h2, 2 * w2, c)
        return out


class Concat(Layer):
    """Runs one layer sequence per input and joins their outputs."""

    kind = "concat"

    def __init__(self, branches):
        super().__init__()
        self.branches = [list(b) for b in branches]

    def spec(self):
        return {"kind": self.kind, "branches": [[l.spec() for l in b] for b in self.branches]}

    def sublayers(self):
        return tuple(l for b in self.branches for l in b)

    def output_shape(self, shapes):
        width = 0
        for branch, shape in zip(self.branches, shapes):
            for layer in branch:
                shape = layer.output_shape(shape)
            width += shape[-1]
        return (width,)

    def forward(self, xs, training=False):
        if not isinstance(xs, (tuple, list)) or len(xs) != len(self.branches):
            raise InputShapeError(f"concat expects {len(self.branches)} inputs")
        outs = []
        for branch, x in zip(self.branches, xs):
            for layer in branch:
                x = layer.forward(x, training)
            outs.append(x)
        self._widths = [o.shape[-1] for o in outs]
        return np.concatenate(outs, axis=-1)

    def backward(self, grad):
        grads_in = []
        start = 0
        for branch, width in zip(self.branches, self._widths):
            g = grad[:, start:start + width]
            start += width
            for layer in reversed(branch):
                if g is None:
                    break
                g = layer.backward(g)
            grads_in.append(g)
        return tuple(grads_in)


LAYER_TYPES = {
    cls.kind: cls
    for cls in (Dense, ReLU, Rescale, Flatten, Dropout, PruneMask, Conv2D, BatchNorm, MaxPool2x2, Concat)
}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "concat":
        return Concat([[layer_from_spec(s) for s in b] for b in spec["branches"]])
    try:
        cls = LAYER_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {kind!r}") from None
    return cls(**spec)
