"""Data-driven Linfoot estimators.

Every estimator takes a :class:`~linfoot.copula.Dataset` and returns an
:class:`EstimateResult` whose ``linfoot`` field lies in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

from ..copula import Dataset
from ..errors import ParameterError
from ._base import (
    RANK_BASED,
    TUNING_EXPONENT,
    EstimateResult,
    Method,
    PseudoSample,
    clamp_to_linfoot,
    default_tuning,
    pseudo_observations,
)
from .kde import copula_density, estimate_kde
from .knn import estimate_fnn, estimate_knn, knn_ball_areas, normal_scores
from .mine import MineConfig, estimate_mine
from .pearson import estimate_pearson, pearson_r


@dataclass(frozen=True)
class EstimatorConfig:
    """Method plus optional overrides; unset tuning falls back to ``default_tuning``."""

    method: Method
    k: int | None = None
    bandwidth: float | None = None
    mine: MineConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.k is not None and self.k < 1:
            raise ParameterError("k must be at least 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ParameterError("bandwidth must be positive")


def estimate(data: Dataset, config) -> EstimateResult:
    """Run the estimator described by ``config`` (an EstimatorConfig or a method name)."""
    if not isinstance(config, EstimatorConfig):
        config = EstimatorConfig(Method(config))
    m = config.method
    if m in (Method.FNN, Method.KNN, Method.KNN_TRUNC):
        k = config.k if config.k is not None else default_tuning(m, data.n)
        if m is Method.FNN:
            return estimate_fnn(data, k)
        return estimate_knn(data, k, truncated=m is Method.KNN_TRUNC)
    if m in (Method.KDE_MR, Method.KDE_BETA):
        h = config.bandwidth if config.bandwidth is not None else default_tuning(m, data.n)
        return estimate_kde(data, h, "mirror" if m is Method.KDE_MR else "beta")
    if m is Method.PEARSON:
        return estimate_pearson(data)
    return estimate_mine(data, config.mine)


__all__ = [
    "EstimateResult", "EstimatorConfig", "Method", "MineConfig", "PseudoSample",
    "RANK_BASED", "TUNING_EXPONENT", "clamp_to_linfoot", "copula_density",
    "default_tuning", "estimate", "estimate_fnn", "estimate_kde", "estimate_knn",
    "estimate_mine", "estimate_pearson", "knn_ball_areas", "normal_scores",
    "pearson_r", "pseudo_observations",
]
