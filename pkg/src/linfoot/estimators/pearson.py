from __future__ import annotations

import math

import numpy as np

from ..copula import Dataset
from ..errors import DegenerateInputError
from ._base import EstimateResult, Method


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("Pearson correlation needs nonzero variance in both variables")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def estimate_pearson(data: Dataset) -> EstimateResult:
    """|r| on the Linfoot scale; ``mi_raw`` is the Gaussian-copula MI ``-log(1 - r^2)/2``."""
    r = pearson_r(data.x, data.y)
    mi = math.inf if abs(r) == 1.0 else -0.5 * math.log1p(-r * r)
    return EstimateResult(abs(r), mi, Method.PEARSON, None, 0)
