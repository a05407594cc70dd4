"""Nearest-neighbour estimators on pseudo-observations (supremum norm)."""

from __future__ import annotations

import logging

import numpy as np
from scipy.spatial import cKDTree

from ..copula import Dataset
from ..errors import ParameterError
from ..numerics import digamma, std_normal_quantile
from ._base import Method, PseudoSample, pseudo_observations, result

log = logging.getLogger(__name__)


def _kth_neighbour_radius(a: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    """Sup-norm distance from each point to its k-th neighbour."""
    pts = np.column_stack([a, b])
    dist, _ = cKDTree(pts).query(pts, k=k + 1, p=np.inf)
    # the point itself is one of the zero distances, so column k is the k-th other point
    return dist[:, k]


def _strict_marginal_counts(coord: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Number of other points with ``|coord_j - coord_i| < radius_i``.

    The comparison must use the exact difference: testing ``coord_j <
    coord_i + radius_i`` lets rounding readmit the neighbour that defines
    the radius.
    """
    pts = coord[:, None]
    below = np.nextafter(radius, 0.0)
    counts = cKDTree(pts).query_ball_point(pts, below, p=np.inf, return_length=True) - 1
    return np.where(radius > 0, counts, 0)


def _check_k(k: int, n: int):
    if k < 1:
        raise ParameterError("k must be at least 1")
    if k >= n:
        raise ParameterError(f"k={k} must be smaller than n={n}")


def normal_scores(ps: PseudoSample):
    return std_normal_quantile(ps.u), std_normal_quantile(ps.v)


def estimate_fnn(data: Dataset, k: int):
    """Kraskov-Stoegbauer-Grassberger estimator (first variant).

    ``I = psi(k) + psi(n) - mean(psi(n_x + 1) + psi(n_y + 1))`` where the
    marginal counts use strict inequality against the k-th neighbour
    distance. Runs on the normal scores of the pseudo-observations: the
    result depends on ranks only, and the uniform square's hard edges
    (which bias KSG upward) are avoided.
    """
    ps = pseudo_observations(data)
    n = ps.n
    _check_k(k, n)
    a, b = normal_scores(ps)
    eps = _kth_neighbour_radius(a, b, k)
    nx = _strict_marginal_counts(a, eps)
    ny = _strict_marginal_counts(b, eps)
    mi = digamma(k) + digamma(n) - float(np.mean(digamma(nx + 1.0) + digamma(ny + 1.0)))
    return result(mi, Method.FNN, k)


def knn_ball_areas(u, v, r):
    """Areas of sup-norm balls of radius ``r``, plain and clipped to the unit square."""
    full = (2.0 * r) ** 2
    wu = np.minimum(u + r, 1.0) - np.maximum(u - r, 0.0)
    wv = np.minimum(v + r, 1.0) - np.maximum(v - r, 0.0)
    return full, wu * wv


def estimate_knn(data: Dataset, k: int, truncated: bool = False):
    """Loftsgaarden-Quesenberry plug-in of the copula density.

    ``c(u_i, v_i) = (k + 1) / (n * area(B_i))``: ``B_i`` is the sup-norm
    ball reaching the k-th neighbour, optionally clipped to the unit square,
    and holds ``k + 1`` sample points counting its centre. Points whose ball
    has zero radius (duplicated pseudo-observations) are skipped and counted.
    """
    ps = pseudo_observations(data)
    n = ps.n
    _check_k(k, n)
    # rank distances are exact multiples of 1/2
    r = _kth_neighbour_radius(ps.rank_u, ps.rank_v, k) / (n + 1)
    ok = r > 0
    skipped = int(np.count_nonzero(~ok))
    if skipped:
        log.warning("knn: skipped %d points with zero neighbour radius", skipped)
    if skipped == n:
        raise ParameterError("every point has a zero neighbour radius")
    full, clipped = knn_ball_areas(ps.u[ok], ps.v[ok], r[ok])
    area = clipped if truncated else full
    mi = float(np.mean(np.log((k + 1) / (n * area))))
    return result(mi, Method.KNN_TRUNC if truncated else Method.KNN, k, skipped)
