from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from ..copula import Dataset
from ..errors import DomainError


class Method(str, Enum):
    FNN = "fnn"
    KNN = "knn"
    KNN_TRUNC = "knn_trunc"
    KDE_MR = "kde_mr"
    KDE_BETA = "kde_beta"
    PEARSON = "pearson"
    MINE = "mine"


RANK_BASED = (Method.FNN, Method.KNN, Method.KNN_TRUNC, Method.KDE_MR, Method.KDE_BETA)

# exponents of n for the neighbour count (k-NN) or bandwidth (KDE)
TUNING_EXPONENT = {
    Method.FNN: 3.0 / 5.0,
    Method.KNN: 3.0 / 7.0,
    Method.KNN_TRUNC: 2.0 / 3.0,
    Method.KDE_MR: -1.0 / 4.0,
    Method.KDE_BETA: -3.0 / 7.0,
}


@dataclass(frozen=True)
class EstimateResult:
    linfoot: float
    mi_raw: float
    method: Method
    tuning: float | None = None
    skipped: int = 0


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Rank-based copula sample.

    ``rank_u`` and ``rank_v`` hold the (average) ranks themselves; they are
    multiples of one half, so distances between them are exact in floating
    point. ``u`` and ``v`` are the ranks divided by ``n + 1``.
    """

    rank_u: np.ndarray
    rank_v: np.ndarray

    @property
    def n(self) -> int:
        return self.rank_u.size

    @property
    def u(self) -> np.ndarray:
        return self.rank_u / (self.n + 1)

    @property
    def v(self) -> np.ndarray:
        return self.rank_v / (self.n + 1)


def pseudo_observations(data: Dataset) -> PseudoSample:
    return PseudoSample(rankdata(data.x, method="average"), rankdata(data.y, method="average"))


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def default_tuning(method, n: int):
    """Neighbour count or bandwidth used when none is given.

    Returns ``None`` for methods without a tuning parameter.
    """
    method = Method(method)
    if n < 2:
        raise DomainError("n must be at least 2")
    expo = TUNING_EXPONENT.get(method)
    if expo is None:
        return None
    if method in (Method.KDE_MR, Method.KDE_BETA):
        return float(n) ** expo
    return max(1, _round_half_up(float(n) ** expo))


def clamp_to_linfoot(mi_raw: float) -> float:
    if not math.isfinite(mi_raw):
        raise DomainError("mutual information estimate is not finite")
    return math.sqrt(-math.expm1(-2.0 * max(mi_raw, 0.0)))


def result(mi_raw: float, method: Method, tuning=None, skipped: int = 0) -> EstimateResult:
    return EstimateResult(clamp_to_linfoot(mi_raw), float(mi_raw), method, tuning, skipped)
