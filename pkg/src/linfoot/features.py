"""Inputs of the supervised estimators: 56 handcrafted statistics and a 50x50 heatmap."""

from __future__ import annotations

import csv
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .copula import Dataset
from .errors import DataFormatError, DegenerateInputError
from .estimators import Method, default_tuning, estimate_fnn, pearson_r

N_BINS = 18
N_FEATURES = 2 + 3 * N_BINS
GRID = 50


def _bin_index(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins over [min, max]; the maximum goes to the last bin.

    A zero range puts everything in bin 0.
    """
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros(values.size, dtype=np.intp)
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.intp)
    return np.clip(idx, 0, bins - 1)


def _moments(y: np.ndarray):
    """(mean, variance, skewness); statistics that need more points are 0."""
    m = y.size
    if m == 0:
        return 0.0, 0.0, 0.0
    mean = float(y.mean())
    if m < 2:
        return mean, 0.0, 0.0
    d = y - mean
    m2 = float(np.mean(d * d))
    var = m2 * m / (m - 1)
    if m < 3 or m2 == 0.0:
        return mean, var, 0.0
    g1 = float(np.mean(d ** 3)) / m2 ** 1.5
    return mean, var, g1 * math.sqrt(m * (m - 1)) / (m - 2)


def conditional_moments(x, y, bins: int = N_BINS) -> np.ndarray:
    """Mean, sample variance and adjusted skewness of ``y`` within each x-bin, shape (bins, 3)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    idx = _bin_index(x, bins)
    return np.array([_moments(y[idx == b]) for b in range(bins)])


def handcrafted_features(data: Dataset, k: int | None = None):
    """The 56-vector: FNN Linfoot, Pearson r, then 18 x 3 conditional moments of y given x.

    Returns ``(features, degenerate)``. ``degenerate`` is True when either
    variable is constant; Pearson r is then 0 and, for constant x, every
    bin statistic is 0 as well.
    """
    n = data.n
    k = min(k if k is not None else default_tuning(Method.FNN, n), n - 1)
    out = np.zeros(N_FEATURES)
    out[0] = estimate_fnn(data, k).linfoot
    degenerate = False
    try:
        out[1] = pearson_r(data.x, data.y)
    except DegenerateInputError:
        degenerate = True
    if np.ptp(data.x) == 0:
        degenerate = True
    else:
        out[2:] = conditional_moments(data.x, data.y).ravel()
    return out, degenerate


def heatmap(data: Dataset) -> np.ndarray:
    """50x50 histogram over the observed ranges, normalised by n.

    ``grid[i, j]`` counts points in the i-th x-interval and j-th y-interval.
    """
    i = _bin_index(np.asarray(data.x, dtype=float), GRID)
    j = _bin_index(np.asarray(data.y, dtype=float), GRID)
    counts = np.bincount(i * GRID + j, minlength=GRID * GRID).astype(float)
    return (counts / data.n).reshape(GRID, GRID)


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    features: np.ndarray
    heatmap: np.ndarray
    n: int
    degenerate: bool = field(default=False)


def featurize(data: Dataset, k: int | None = None) -> FeatureBundle:
    feats, degenerate = handcrafted_features(data, k)
    if np.ptp(data.y) == 0:
        degenerate = True
    return FeatureBundle(feats, heatmap(data), data.n, degenerate)


def stack_inputs(bundles):
    """Arrays for the networks: ``(heatmaps (N, 50, 50, 1), features (N, 56))``."""
    maps = np.stack([b.heatmap for b in bundles])[..., None]
    feats = np.stack([b.features for b in bundles])
    return maps, feats


# -- interchange file --------------------------------------------------------

HEADER = (
    [f"f{i}" for i in range(N_FEATURES)]
    + [f"h{i}_{j}" for i in range(GRID) for j in range(GRID)]
    + ["n"]
)


@contextmanager
def open_text_out(dest):
    """Yield a writable text stream for a path, or pass an open stream through."""
    if hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "w", newline="") as fh:
            yield fh


def write_bundles(dest, bundles, targets=None) -> None:
    """One CSV record per dataset: 56 features, 2500 heatmap cells (x-major), n.

    When ``targets`` is given a final ``target`` column is appended.
    """
    with_target = targets is not None
    if with_target and len(targets) != len(bundles):
        raise ValueError("one target per bundle is required")
    with open_text_out(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER + (["target"] if with_target else []))
        for i, b in enumerate(bundles):
            row = [repr(float(v)) for v in b.features]
            row += [repr(float(v)) for v in b.heatmap.ravel()]
            row.append(str(int(b.n)))
            if with_target:
                row.append(repr(float(targets[i])))
            w.writerow(row)


def read_bundles(path):
    """Inverse of :func:`write_bundles`; returns ``(bundles, targets or None)``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][: len(HEADER)] != HEADER:
        raise DataFormatError(f"{path} is not a feature interchange file")
    with_target = rows[0][len(HEADER):] == ["target"]
    width = len(HEADER) + with_target
    bundles, targets = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataFormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            vals = np.array([float(v) for v in row[: N_FEATURES + GRID * GRID]])
            n = int(row[len(HEADER) - 1])
            if with_target:
                targets.append(float(row[-1]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        bundles.append(FeatureBundle(vals[:N_FEATURES], vals[N_FEATURES:].reshape(GRID, GRID), n))
    return bundles, (np.array(targets) if with_target else None)
