"""Copula specifications, exact Linfoot ground truth and dataset simulation.

Two dependence scales are used throughout: mutual information in nats and
the Linfoot informational correlation ``L = sqrt(1 - exp(-2 I))``. Both are
plain floats in this package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from .errors import DataFormatError, DomainError
from .numerics import Domain, QuadSpec, RngStream, quad2d, std_normal_quantile

# Beyond this the Clayton parameter explodes and the inversion loses precision.
MAX_LINFOOT_TARGET = 0.995
# Clayton parameters below this are treated as independence.
THETA_EPS = 1e-8


class CopulaKind(str, Enum):
    GAUSSIAN = "gaussian"
    CLAYTON = "clayton"
    INDEPENDENCE = "independence"


@dataclass(frozen=True)
class CopulaSpec:
    """Which copula generates a dataset.

    ``param`` is the correlation for Gaussian, theta for Clayton and is
    ignored for independence.
    """

    kind: CopulaKind
    param: float | None = None

    def __post_init__(self):
        kind = CopulaKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is CopulaKind.GAUSSIAN:
            if self.param is None or not 0.0 <= self.param < 1.0:
                raise DomainError("Gaussian copula needs 0 <= rho < 1")
        elif kind is CopulaKind.CLAYTON:
            if self.param is None or not self.param > 0.0 or not math.isfinite(self.param):
                raise DomainError("Clayton copula needs theta > 0")
        else:
            object.__setattr__(self, "param", None)

    @classmethod
    def gaussian(cls, rho):
        return cls(CopulaKind.GAUSSIAN, float(rho))

    @classmethod
    def clayton(cls, theta):
        return cls(CopulaKind.CLAYTON, float(theta))

    @classmethod
    def independence(cls):
        return cls(CopulaKind.INDEPENDENCE)

    def linfoot(self) -> float:
        """Exact Linfoot correlation of this copula."""
        if self.kind is CopulaKind.GAUSSIAN:
            return gaussian_linfoot(self.param)
        if self.kind is CopulaKind.CLAYTON:
            return clayton_linfoot(self.param)
        return 0.0


@dataclass(frozen=True)
class ArchimedeanGenerator:
    """Inverse generator psi of an Archimedean copula with its derivatives.

    All three callables must accept numpy arrays on ``[0, inf)``.
    """

    psi: Callable
    d1: Callable
    d2: Callable

    @classmethod
    def clayton(cls, theta: float) -> "ArchimedeanGenerator":
        if not theta > 0:
            raise DomainError("Clayton generator needs theta > 0")
        t = float(theta)
        return cls(
            psi=lambda s: (1.0 + t * s) ** (-1.0 / t),
            d1=lambda s: -((1.0 + t * s) ** (-1.0 - 1.0 / t)),
            d2=lambda s: (1.0 + t) * (1.0 + t * s) ** (-2.0 - 1.0 / t),
        )

    @classmethod
    def independence(cls) -> "ArchimedeanGenerator":
        return cls(psi=lambda s: np.exp(-s), d1=lambda s: -np.exp(-s), d2=lambda s: np.exp(-s))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired observations ``(x_i, y_i)``, ``i = 1..n``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float).ravel()
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if x.shape != y.shape:
            raise DomainError("x and y must have the same length")
        if x.size < 2:
            raise DomainError("a dataset needs at least two observations")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def take(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("x,y\n")
            for a, b in zip(self.x, self.y):
                fh.write(f"{a:.17g},{b:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        data, _ = read_xy_csv(path)
        return data


def gaussianize(data: Dataset) -> Dataset:
    """Replace each margin by the normal scores ``Phi^-1(rank / (n + 1))`` (average ranks)."""
    n = data.n
    u = rankdata(data.x, method="average") / (n + 1)
    v = rankdata(data.y, method="average") / (n + 1)
    return Dataset(std_normal_quantile(u), std_normal_quantile(v))


def read_xy_csv(path):
    """Read a two-column CSV; return the dataset and the number of dropped rows.

    A first line that does not parse as numbers is taken as a header. Rows
    with an empty or non-numeric field are dropped and counted.
    """
    xs, ys = [], []
    dropped = 0
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if rows and not _is_numeric_row(rows[0][:2]):
        rows = rows[1:]
    for row in rows:
        if len(row) < 2:
            dropped += 1
            continue
        try:
            a, b = float(row[0]), float(row[1])
        except ValueError:
            dropped += 1
            continue
        if not (math.isfinite(a) and math.isfinite(b)):
            dropped += 1
            continue
        xs.append(a)
        ys.append(b)
    if len(xs) < 2:
        raise DataFormatError(f"{path}: fewer than two complete numeric rows")
    return Dataset(np.array(xs), np.array(ys)), dropped


def _is_numeric_row(fields):
    try:
        [float(f) for f in fields]
    except ValueError:
        return False
    return len(fields) == 2


# ---------------------------------------------------------------------------
# the two scales
# ---------------------------------------------------------------------------


def mi_to_linfoot(mi: float) -> float:
    if not mi >= 0:
        raise DomainError("mutual information must be non-negative")
    return math.sqrt(-math.expm1(-2.0 * mi))


def linfoot_to_mi(linfoot: float) -> float:
    if not 0.0 <= linfoot < 1.0:
        raise DomainError("Linfoot correlation must lie in [0, 1) to map back to MI")
    return -0.5 * math.log1p(-linfoot * linfoot)


def gaussian_linfoot(rho: float) -> float:
    """Linfoot correlation of a Gaussian copula; equals ``|rho|``."""
    if not 0.0 <= rho < 1.0:
        raise DomainError("rho must lie in [0, 1)")
    return mi_to_linfoot(-0.5 * math.log1p(-rho * rho))


def clayton_mi(theta: float) -> float:
    """Mutual information of the Clayton copula in nats.

    Equal to ``log(1+t) - (2t+1)(1 + 1/(1+t)) + 2(1+t)``, which reduces to
    ``log1p(t) - t/(1+t)``; the reduced form avoids cancellation.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    return math.log1p(theta) - theta / (1.0 + theta)


def clayton_linfoot(theta: float) -> float:
    return mi_to_linfoot(clayton_mi(theta))


def archimedean_mi_oracle(gen: ArchimedeanGenerator, spec: QuadSpec | None = None) -> float:
    """Mutual information of an Archimedean copula by 2-D quadrature.

    Integrates ``psi''(x+y) log(psi''(x+y) / (psi'(x) psi'(y)))`` over the
    positive quadrant.
    """
    if spec is None:
        spec = QuadSpec(abs_tol=1e-10, domain=Domain.POSITIVE_QUADRANT)
    if spec.domain is not Domain.POSITIVE_QUADRANT:
        raise DomainError("the generator integral lives on the positive quadrant")

    def integrand(x, y):
        d2 = gen.d2(x + y)
        log_ratio = np.log(d2) - np.log(-gen.d1(x)) - np.log(-gen.d1(y))
        return np.where(d2 > 0, d2 * log_ratio, 0.0)

    return quad2d(integrand, spec)


def archimedean_linfoot_oracle(gen: ArchimedeanGenerator, spec: QuadSpec | None = None) -> float:
    return mi_to_linfoot(max(archimedean_mi_oracle(gen, spec), 0.0))


def clayton_auxiliary_integrals(theta: float, spec: QuadSpec | None = None):
    """Numerical values of the three auxiliary integrals behind the Clayton MI.

    Returns ``(I1, I2, I3)`` where, with ``w = 1 + theta (x + y)`` and the
    common weight ``w ** (-2 - 1/theta)``, I1 integrates the weight alone,
    I2 the weight times ``log w`` and I3 the weight times ``log(1 + theta y)``.
    """
    if spec is None:
        spec = QuadSpec(abs_tol=1e-11, domain=Domain.POSITIVE_QUADRANT)
    t = float(theta)
    p = -2.0 - 1.0 / t

    def weight(x, y):
        return (1.0 + t * (x + y)) ** p

    i1 = quad2d(weight, spec)
    i2 = quad2d(lambda x, y: weight(x, y) * np.log1p(t * (x + y)), spec)
    i3 = quad2d(lambda x, y: weight(x, y) * np.log1p(t * y), spec)
    return i1, i2, i3


def param_from_linfoot(kind, target: float) -> CopulaSpec:
    """Copula of the given family whose Linfoot correlation equals ``target``."""
    kind = CopulaKind(kind)
    if not 0.0 <= target <= MAX_LINFOOT_TARGET:
        raise DomainError(f"target Linfoot must lie in [0, {MAX_LINFOOT_TARGET}]")
    if kind is CopulaKind.GAUSSIAN:
        return CopulaSpec.gaussian(target)
    if kind is CopulaKind.INDEPENDENCE:
        raise DomainError("independence has no free parameter")
    if target == 0.0:
        return CopulaSpec.independence()
    lo, hi = 0.0, 1.0
    while clayton_linfoot(hi) < target:
        hi *= 2.0
    # bisect to the last representable theta
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if clayton_linfoot(mid) < target:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    if theta < THETA_EPS:
        return CopulaSpec.independence()
    return CopulaSpec.clayton(theta)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

_U_FLOOR = np.finfo(float).tiny


def sample(spec: CopulaSpec, n: int, rng: RngStream) -> Dataset:
    """Draw ``n`` pairs with standard normal marginals from ``spec``."""
    if n < 2:
        raise DomainError("n must be at least 2")
    if spec.kind is CopulaKind.INDEPENDENCE or (
        spec.kind is CopulaKind.CLAYTON and spec.param < THETA_EPS
    ):
        z = rng.normal((n, 2))
        return Dataset(z[:, 0], z[:, 1])
    if spec.kind is CopulaKind.GAUSSIAN:
        rho = spec.param
        z = rng.normal((n, 2))
        x = z[:, 0]
        y = rho * z[:, 0] + math.sqrt(1.0 - rho * rho) * z[:, 1]
        return Dataset(x, y)
    # Marshall-Olkin frailty with V ~ Gamma(1/theta, rate 1), whose Laplace transform is
    # (1 + s)^(-1/theta): U_i = (1 + E_i / V)^(-1/theta) is uniform
    theta = spec.param
    v = rng.gamma(1.0 / theta, n)
    e = rng.exponential((n, 2))
    with np.errstate(divide="ignore", over="ignore"):
        log_u = -np.log1p(e / v[:, None]) / theta
    # quantile of the smaller tail so values of U near 1 keep full precision
    upper = log_u > -math.log(2.0)
    tail = np.where(upper, -np.expm1(log_u), np.exp(log_u))
    tail = np.clip(tail, _U_FLOOR, 0.5)
    z = std_normal_quantile(tail)
    z = np.where(upper, -z, z)
    return Dataset(z[:, 0], z[:, 1])
