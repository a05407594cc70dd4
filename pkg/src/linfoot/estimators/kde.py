"""Boundary-corrected kernel density estimators of the copula density."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln

from ..copula import Dataset
from ..errors import DomainError
from ._base import Method, PseudoSample, pseudo_observations, result

DENSITY_FLOOR = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)


def _mirror_kernel(at: np.ndarray, obs: np.ndarray, bandwidth: float) -> np.ndarray:
    """Sum of Gaussian kernels over an observation and its two reflections.

    The bandwidth spans two kernel standard deviations.
    """
    h = 0.5 * bandwidth
    d = at[:, None] - obs[None, :]
    s = at[:, None] + obs[None, :]
    k = np.exp(-0.5 * (d / h) ** 2)
    k += np.exp(-0.5 * (s / h) ** 2)
    k += np.exp(-0.5 * ((2.0 - s) / h) ** 2)
    return k / (h * _SQRT_2PI)


def _beta_kernel(at: np.ndarray, obs: np.ndarray, h: float) -> np.ndarray:
    """Beta(at/h + 1, (1-at)/h + 1) density evaluated at each observation."""
    a = at / h + 1.0
    b = (1.0 - at) / h + 1.0
    logk = (
        (a - 1.0)[:, None] * np.log(obs)[None, :]
        + (b - 1.0)[:, None] * np.log1p(-obs)[None, :]
        - betaln(a, b)[:, None]
    )
    return np.exp(logk)


_KERNELS = {"mirror": _mirror_kernel, "beta": _beta_kernel}


def _beta_mass(obs: np.ndarray, h: float) -> np.ndarray:
    """Integral over [0, 1] of each observation's beta-kernel contribution."""
    t = 0.5 * (_GL_NODES + 1.0)
    return 0.5 * _GL_WEIGHTS @ _beta_kernel(t, obs, h)


def copula_density(ps: PseudoSample, bandwidth: float, kernel: str, u, v, chunk=2048):
    """Evaluate the kernel estimate of the copula density at points ``(u, v)``.

    The beta-kernel estimate does not integrate to one by construction; it
    is rescaled by its exact total mass, which factorises per observation.
    """
    kern = _KERNELS[kernel]
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    pu, pv = ps.u, ps.v
    out = np.empty(u.size)
    for start in range(0, u.size, chunk):
        sl = slice(start, start + chunk)
        out[sl] = np.einsum("ij,ij->i", kern(u[sl], pu, bandwidth), kern(v[sl], pv, bandwidth))
    if kernel == "beta":
        mass = float(np.dot(_beta_mass(pu, bandwidth), _beta_mass(pv, bandwidth)))
        return out / mass
    return out / ps.n


def estimate_kde(data: Dataset, bandwidth: float, kernel: str = "mirror"):
    """Mean log copula density at the pseudo-observations.

    ``kernel='mirror'`` reflects every point across the edges and corners
    of the unit square (nine copies) under a product Gaussian kernel;
    ``kernel='beta'`` uses product beta kernels whose support is [0, 1].
    """
    if kernel not in _KERNELS:
        raise DomainError(f"unknown kernel {kernel!r}")
    if not 0.0 < bandwidth < 1.0:
        raise DomainError("bandwidth must lie in (0, 1)")
    ps = pseudo_observations(data)
    dens = copula_density(ps, bandwidth, kernel, ps.u, ps.v)
    mi = float(np.mean(np.log(np.maximum(dens, DENSITY_FLOOR))))
    method = Method.KDE_MR if kernel == "mirror" else Method.KDE_BETA
    return result(mi, method, bandwidth)
