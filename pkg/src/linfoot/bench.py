"""Simulation grid, bias/sd aggregation, bootstrap intervals and training corpora."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .copula import CopulaKind, Dataset, param_from_linfoot, sample
from .errors import ConvergenceError, DomainError, LinfootError
from .estimators import EstimatorConfig, Method, MineConfig, estimate
from .features import FeatureBundle, featurize, open_text_out, stack_inputs, write_bundles
from .neural.model import Network, predict_linfoot
from .numerics import RngStream, derive_stream_id

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)
DEFAULT_SIZES = (100, 200, 500, 1000)
REPORT_HEADER = ["copula", "level", "n", "method", "mean", "sd", "bias", "replications", "skipped"]


# -- estimator adapters ------------------------------------------------------


def model_inputs(model: Network, bundles):
    """Arrange feature bundles the way ``model`` expects them."""
    maps, feats = stack_inputs(bundles)
    shape = model.input_shapes()
    if isinstance(shape[0], tuple):
        return (maps, feats)
    return feats if len(shape) == 1 else maps


def network_estimate(model: Network, data: Dataset) -> float:
    return float(predict_linfoot(model, model_inputs(model, [featurize(data)]))[0])


def as_estimator(obj):
    """Turn a method name, EstimatorConfig, trained Network or callable into ``Dataset -> float``."""
    if isinstance(obj, Network):
        return lambda data: network_estimate(obj, data)
    if isinstance(obj, (EstimatorConfig, Method, str)):
        cfg = obj if isinstance(obj, EstimatorConfig) else EstimatorConfig(Method(obj))
        return lambda data: estimate(data, cfg).linfoot
    if callable(obj):
        def call(data):
            out = obj(data)
            return float(getattr(out, "linfoot", out))
        return call
    raise TypeError(f"cannot use {obj!r} as an estimator")


# -- grid --------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    copulas: tuple = ("gaussian", "clayton")
    linfoot_levels: tuple = DEFAULT_LEVELS
    sample_sizes: tuple = DEFAULT_SIZES
    replications: int = 200
    base_seed: int = 0
    methods: tuple = ("fnn",)

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        for level in self.linfoot_levels:
            if not 0.0 <= level <= 0.995:
                raise DomainError(f"level {level} outside [0, 0.995]")
        kinds = tuple(CopulaKind(c).value for c in self.copulas)
        if any(k == CopulaKind.INDEPENDENCE.value for k in kinds):
            raise DomainError("grid copulas are gaussian and/or clayton (level 0 is independence)")
        object.__setattr__(self, "copulas", kinds)
        object.__setattr__(self, "linfoot_levels", tuple(float(v) for v in self.linfoot_levels))
        object.__setattr__(self, "sample_sizes", tuple(int(v) for v in self.sample_sizes))
        object.__setattr__(self, "methods", tuple(str(getattr(m, "value", m)) for m in self.methods))


@dataclass(frozen=True)
class CellResult:
    copula: str
    level: float
    n: int
    method: str
    mean: float
    sd: float
    bias: float
    replications: int
    skipped: int
    estimates: np.ndarray = field(repr=False, compare=False, default=None)


def replication_stream(base_seed, copula, level, n, r) -> RngStream:
    return RngStream(base_seed, derive_stream_id(str(copula), repr(float(level)), int(n), int(r)))


def _method_estimators(spec: GridSpec, extra):
    out = {}
    for m in spec.methods:
        if extra and m in extra:
            out[m] = extra[m]
        else:
            out[m] = Method(m)
    return out


def run_grid(spec: GridSpec, estimators=None, progress=None):
    """Mean, sd (n-1 denominator) and bias of every method in every cell.

    ``estimators`` may map a method label to a custom estimator (anything
    :func:`as_estimator` accepts). MINE critics are seeded per replication.
    Failed replications are skipped and counted.
    """
    chosen = _method_estimators(spec, estimators)
    results = []
    for copula in spec.copulas:
        for level in spec.linfoot_levels:
            cspec = param_from_linfoot(copula, level)
            for n in spec.sample_sizes:
                values = {m: [] for m in chosen}
                skipped = {m: 0 for m in chosen}
                for r in range(spec.replications):
                    stream = replication_stream(spec.base_seed, copula, level, n, r)
                    data = sample(cspec, n, stream)
                    for label, est in chosen.items():
                        if est is Method.MINE:
                            seed = derive_stream_id("mine", spec.base_seed, copula, repr(level), n, r)
                            fn = as_estimator(EstimatorConfig(Method.MINE, mine=MineConfig(seed=seed)))
                        else:
                            fn = as_estimator(est)
                        try:
                            values[label].append(fn(data))
                        except LinfootError as exc:
                            skipped[label] += 1
                            log.warning("%s %s L=%g n=%d rep %d skipped: %s", label, copula, level, n, r, exc)
                for label in chosen:
                    v = np.asarray(values[label], dtype=float)
                    mean = float(np.mean(v)) if v.size else math.nan
                    sd = float(np.std(v, ddof=1)) if v.size > 1 else math.nan
                    results.append(CellResult(copula, level, n, label, mean, sd, mean - level,
                                              int(v.size), skipped[label], v))
                if progress is not None:
                    progress(copula, level, n)
    return results


def _g6(v) -> str:
    return "nan" if not math.isfinite(v) else f"{v:.6g}"


def write_report(results, dest) -> None:
    """Report CSV to a path or an open text stream."""
    with open_text_out(dest) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for c in results:
            w.writerow([c.copula, _g6(c.level), c.n, c.method, _g6(c.mean), _g6(c.sd),
                        _g6(c.bias), c.replications, c.skipped])


# -- bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    lower: float
    upper: float
    estimate: float
    replicates: np.ndarray = field(repr=False)
    redraws: int = 0


def nearest_rank(sorted_values: np.ndarray, p: float) -> float:
    """Smallest value with at least a fraction ``p`` of the sample at or below it."""
    m = sorted_values.size
    rank = max(1, math.ceil(p * m - 1e-12))
    return float(sorted_values[min(rank, m) - 1])


def bootstrap_ci(data: Dataset, estimator, B: int = 1000, alpha: float = 0.05, seed: int = 0):
    """Percentile interval from ``B`` resamples of the rows (nearest-rank rule).

    A resample on which the estimator fails is redrawn; at most ``10 * B``
    draws are attempted in total.
    """
    if B < 100:
        raise DomainError("B must be at least 100")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    fn = as_estimator(estimator)
    point = fn(data)
    rng = RngStream(seed, derive_stream_id("bootstrap"))
    n = data.n
    reps, attempts = [], 0
    while len(reps) < B:
        if attempts >= 10 * B:
            raise ConvergenceError(f"bootstrap: only {len(reps)} of {B} resamples succeeded "
                                   f"in {attempts} attempts")
        attempts += 1
        idx = rng.integers(0, n, n)
        try:
            reps.append(fn(data.take(idx)))
        except LinfootError:
            continue
    reps = np.sort(np.asarray(reps, dtype=float))
    return BootstrapResult(nearest_rank(reps, alpha / 2), nearest_rank(reps, 1.0 - alpha / 2),
                           point, reps, attempts - B)


# -- training corpus ---------------------------------------------------------


@dataclass(frozen=True)
class CorpusConfig:
    """Training-set recipe.

    Targets are drawn from ``(1 - low_fraction)`` U(0, upper) plus
    ``low_fraction`` U(0, low_upper). ``per_cell`` datasets are made for
    every (copula, sample size) pair; 800 is the desk-scale default and
    4000 the full protocol.
    """

    copulas: tuple = ("gaussian", "clayton")
    sample_sizes: tuple = DEFAULT_SIZES
    per_cell: int = 800
    seed: int = 0
    upper: float = 0.99
    low_fraction: float = 0.1
    low_upper: float = 0.01

    def __post_init__(self):
        if self.per_cell < 1:
            raise DomainError("per_cell must be at least 1")
        object.__setattr__(self, "copulas", tuple(CopulaKind(c).value for c in self.copulas))
        object.__setattr__(self, "sample_sizes", tuple(int(v) for v in self.sample_sizes))


@dataclass(frozen=True, eq=False)
class Corpus:
    bundles: list
    targets: np.ndarray
    copulas: list
    sizes: np.ndarray


def draw_target(rng: RngStream, cfg: CorpusConfig) -> float:
    u = rng.uniform(2)
    top = cfg.low_upper if u[0] < cfg.low_fraction else cfg.upper
    return float(u[1] * top)


def make_training_corpus(cfg: CorpusConfig, path=None, progress=None) -> Corpus:
    bundles, targets, kinds, sizes = [], [], [], []
    for copula in cfg.copulas:
        for n in cfg.sample_sizes:
            for i in range(cfg.per_cell):
                rng = RngStream(cfg.seed, derive_stream_id("corpus", copula, n, i))
                target = draw_target(rng.child("target"), cfg)
                data = sample(param_from_linfoot(copula, target), n, rng.child("data"))
                bundles.append(featurize(data))
                targets.append(target)
                kinds.append(copula)
                sizes.append(n)
            if progress is not None:
                progress(copula, n)
    corpus = Corpus(bundles, np.array(targets), kinds, np.array(sizes))
    if path is not None:
        write_bundles(path, bundles, corpus.targets)
    return corpus


__all__ = [
    "BootstrapResult", "CellResult", "Corpus", "CorpusConfig", "FeatureBundle", "GridSpec",
    "as_estimator", "bootstrap_ci", "make_training_corpus", "model_inputs", "nearest_rank",
    "network_estimate", "run_grid", "write_report",
]
