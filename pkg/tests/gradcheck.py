"""Central finite-difference checks for layer gradients."""

import numpy as np

from linfoot.neural.layers import (
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2x2,
    PruneMask,
    ReLU,
    Rescale,
)
from linfoot.numerics import RngStream

STEP = 1e-5


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def _as_tuple(x):
    return x if isinstance(x, tuple) else (x,)


def check_layer(layer, x, training, rng, reseed=None):
    """Worst relative error over the input gradient(s) and every parameter gradient."""
    out = layer.forward(x, training)
    probe = rng.normal(size=out.shape)

    def loss():
        if reseed is not None:
            reseed()
        return float(np.sum(layer.forward(x, training) * probe))

    if reseed is not None:
        reseed()
    layer.forward(x, training)
    gin = layer.backward(probe)
    worst = 0.0
    for xi, gi in zip(_as_tuple(x), _as_tuple(gin)):
        num = np.zeros_like(xi)
        it = np.nditer(xi, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = xi[i]
            xi[i] = old + STEP
            up = loss()
            xi[i] = old - STEP
            down = loss()
            xi[i] = old
            num[i] = (up - down) / (2 * STEP)
        worst = max(worst, rel_err(gi, num))
    owners = [layer, *layer.sublayers()]
    analytic = {(id(o), k): v.copy() for o in owners for k, v in o.grads.items()}
    for owner, key in [(o, k) for o in owners for k in o.params]:
        p = owner.params[key]
        num = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + STEP
            up = loss()
            p[i] = old - STEP
            down = loss()
            p[i] = old
            num[i] = (up - down) / (2 * STEP)
        worst = max(worst, rel_err(analytic[(id(owner), key)], num))
    return worst


def _away_from_zero(rng, shape, gap=0.05):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < gap, np.sign(x + 1e-12) * gap, x)


def layer_cases(seed):
    """One random small instance of every layer kind, as (name, layer, input, training, reseed)."""
    rng = np.random.default_rng(seed)
    init = RngStream(seed, 99)
    n = int(rng.integers(2, 5))
    cases = []

    d = Dense(int(rng.integers(2, 6)), int(rng.integers(1, 5)))
    d.init_params(init.child("dense"))
    d.params["b"] = rng.normal(size=d.n_out)
    cases.append(("dense", d, rng.normal(size=(n, d.n_in)), True, None))

    cases.append(("relu", ReLU(), _away_from_zero(rng, (n, 5)), True, None))
    cases.append(("rescale", Rescale(float(rng.uniform(0.5, 3))), rng.normal(size=(n, 3)), True, None))
    cases.append(("flatten", Flatten(), rng.normal(size=(n, 3, 2, 2)), True, None))
    cases.append(("prune_mask", PruneMask(0.25), rng.normal(size=(n, 4)), True, None))

    drop = Dropout(0.4)
    mask_seed = int(rng.integers(1 << 30))

    def reseed(layer=drop, s=mask_seed):
        layer.rng = RngStream(s, 1)
    reseed()
    cases.append(("dropout", drop, rng.normal(size=(n, 6)), True, reseed))

    k = int(rng.choice([1, 3, 5]))
    conv = Conv2D(int(rng.integers(1, 3)), int(rng.integers(1, 4)), k)
    conv.init_params(init.child("conv"))
    conv.params["b"] = rng.normal(size=conv.filters)
    h, w = int(rng.integers(3, 7)), int(rng.integers(3, 7))
    cases.append(("conv2d", conv, rng.normal(size=(2, h, w, conv.in_channels)), True, None))

    c = int(rng.integers(1, 4))
    bn = BatchNorm(c)
    bn.params = {"gamma": rng.uniform(0.5, 2, c), "beta": rng.normal(size=c)}
    cases.append(("batchnorm_train", bn, rng.normal(size=(3, 2, 3, c)) * 2 + 1, True, None))
    bn2 = BatchNorm(c)
    bn2.params = {"gamma": rng.uniform(0.5, 2, c), "beta": rng.normal(size=c)}
    bn2.state = {"mean": rng.normal(size=c), "var": rng.uniform(0.5, 2, c)}
    cases.append(("batchnorm_infer", bn2, rng.normal(size=(2, 3, 3, c)), False, None))

    # distinct values so the argmax of each window is stable under the FD step
    vals = rng.permutation(2 * 5 * 5 * 2).reshape(2, 5, 5, 2) * 0.1 + rng.uniform(0, 0.01, (2, 5, 5, 2))
    cases.append(("maxpool2x2", MaxPool2x2(), vals, True, None))

    a, b = Dense(3, 2), Dense(4, 3)
    a.init_params(init.child("a"))
    b.init_params(init.child("b"))
    cat = Concat([[a], [Flatten(), b]])
    cases.append(("concat", cat, (rng.normal(size=(n, 3)), rng.normal(size=(n, 2, 2))), True, None))
    return cases

