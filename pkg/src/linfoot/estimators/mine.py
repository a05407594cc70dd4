"""Neural Donsker-Varadhan lower bound (MINE) with a small MLP critic."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..copula import Dataset
from ..errors import ParameterError, TrainingDivergedError
from ..neural.layers import Dense, ReLU
from ..neural.model import Adam, Network
from ..numerics import RngStream, derive_stream_id
from ._base import Method, result


@dataclass(frozen=True)
class MineConfig:
    """Critic width, optimisation schedule and seed.

    ``batch=None`` means ``min(256, n // 2)``. ``ema_rate`` is the weight
    given to the newest batch in the moving average that debiases the
    gradient of the log-partition term. ``holdout`` is the fraction of rows
    kept out of training and used for the final bound (0 evaluates on the
    training rows themselves, which inflates the estimate near
    independence). ``eval_shifts`` caps how many cyclic shifts of the y
    column form the product-of-marginals sample for that bound.
    """

    hidden: tuple = (64, 32)
    steps: int = 300
    batch: int | None = None
    learning_rate: float = 3e-4
    seed: int = 0
    ema_rate: float = 0.01
    eval_shifts: int = 200
    holdout: float = 0.5

    def __post_init__(self):
        if self.steps < 1:
            raise ParameterError("steps must be at least 1")
        if self.batch is not None and self.batch < 2:
            raise ParameterError("batch must be at least 2")
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be positive")
        if not 0.0 <= self.holdout < 1.0:
            raise ParameterError("holdout must lie in [0, 1)")
        if not 0.0 < self.ema_rate <= 1.0:
            raise ParameterError("ema_rate must lie in (0, 1]")

    def batch_for(self, n: int) -> int:
        return min(256, n // 2) if self.batch is None else self.batch


def build_critic(hidden=(64, 32), seed=0) -> Network:
    layers, width = [], 2
    for h in hidden:
        layers += [Dense(width, h), ReLU()]
        width = h
    layers.append(Dense(width, 1))
    return Network(layers, name="mine_critic").init(seed)


def _logmeanexp(t: np.ndarray) -> float:
    m = float(np.max(t))
    return m + math.log(float(np.mean(np.exp(t - m))))


def dv_bound(critic: Network, xy: np.ndarray, shifts: int) -> float:
    """``mean T(joint) - log mean exp T(product of marginals)`` on a whole sample.

    The product sample pairs ``x_i`` with ``y_(i+s) mod n`` for
    ``s = 1..shifts``, so no pair from the joint sample is reused.
    """
    n = xy.shape[0]
    joint = critic.predict(xy, batch_size=4096)
    shifts = max(1, min(shifts, n - 1))
    marg = np.concatenate([
        critic.predict(np.column_stack([xy[:, 0], np.roll(xy[:, 1], -s)]), batch_size=4096)
        for s in range(1, shifts + 1)
    ])
    return float(np.mean(joint)) - _logmeanexp(marg)


def _standardise(data: Dataset) -> np.ndarray:
    xy = np.column_stack([data.x, data.y]).astype(float)
    sd = xy.std(axis=0)
    return (xy - xy.mean(axis=0)) / np.where(sd == 0, 1.0, sd)


def train_critic(xy: np.ndarray, cfg: MineConfig, rng: RngStream) -> Network:
    """Gradient ascent on the mini-batch DV bound."""
    n = xy.shape[0]
    b = cfg.batch_for(n)
    critic = build_critic(cfg.hidden, cfg.seed)
    opt = Adam(critic.parameters(), cfg.learning_rate)
    log_ema = None
    order, pos = rng.permutation(n), 0
    for step in range(cfg.steps):
        if pos + b > n:
            order, pos = rng.permutation(n), 0
        idx = order[pos:pos + b]
        pos += b
        joint = xy[idx]
        marg = np.column_stack([joint[:, 0], joint[rng.permutation(b), 1]])
        t = critic.forward(np.vstack([joint, marg]), training=True)[:, 0]
        tj, tm = t[:b], t[b:]
        log_mean = _logmeanexp(tm)
        bound = float(np.mean(tj)) - log_mean
        if not math.isfinite(bound):
            raise TrainingDivergedError(f"MINE bound is not finite at step {step}", epoch=step)
        # moving average of mean exp(T) over marginal batches, kept in log space
        if log_ema is None:
            log_ema = log_mean
        else:
            log_ema = float(np.logaddexp(math.log1p(-cfg.ema_rate) + log_ema, math.log(cfg.ema_rate) + log_mean))
        # ascent on the bound == descent on its negative
        grad = np.empty(2 * b)
        grad[:b] = -1.0 / b
        grad[b:] = np.exp(tm - log_ema) / b
        critic.backward(grad[:, None])
        opt.step()
    return critic


def estimate_mine(data: Dataset, cfg: MineConfig | None = None):
    """MINE estimate of mutual information, mapped to the Linfoot scale.

    Stochastic by design: different seeds give different estimates on the
    same data. Deterministic for a fixed ``cfg.seed``.
    """
    cfg = cfg or MineConfig()
    n = data.n
    b = cfg.batch_for(n)
    if b < 2 or n < 2 * b:
        raise ParameterError(f"MINE needs n >= 2*batch (n={n}, batch={b})")
    xy = _standardise(data)
    rng = RngStream(cfg.seed, derive_stream_id("mine"))
    n_eval = int(round(cfg.holdout * n))
    if n_eval:
        perm = rng.permutation(n)
        fit, held = xy[perm[n_eval:]], xy[perm[:n_eval]]
        if fit.shape[0] < b or n_eval < 2:
            raise ParameterError("holdout split leaves too few rows")
    else:
        fit = held = xy
    critic = train_critic(fit, cfg, rng)
    mi = dv_bound(critic, held, cfg.eval_shifts)
    if not math.isfinite(mi):
        raise TrainingDivergedError("MINE bound on the full sample is not finite")
    return result(mi, Method.MINE, None)
