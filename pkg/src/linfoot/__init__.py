"""Estimation of the Linfoot informational correlation of bivariate data.

Submodules: ``numerics`` (special functions, quadrature, random streams),
``copula`` (ground truth and simulation), ``estimators`` (nonparametric and
MINE estimators), ``features`` and ``neural`` (supervised estimators),
``bench`` (simulation grid, bootstrap, training corpora) and ``cli``.
"""

__version__ = "0.1.0"
