"""High-probability rank error of the noisy search and the implied coverage band.

These are reporting utilities. The search itself never consults them.
"""

import math

from .errors import DomainError
from .quantile import _halvings


def rank_error_bound(u: float, rho: float, beta: float) -> float:
    """Rank error ``tau`` that the noisy search exceeds with probability <= beta.

    With ``N = ceil(log2 u)`` steps and ``u = (b - a) / precision``,
    ``tau = sqrt(N / rho * log(2 N / beta))`` (natural log). This is
    ``sd * sqrt(2 log(2N / beta))`` for the per-step noise ``sd``, i.e. a
    union bound of Gaussian tails over the ``N`` steps.
    """
    if not u > 1:
        raise DomainError(f"u must exceed 1, got {u}")
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if not 0 < beta < 1:
        raise DomainError(f"beta must be in (0, 1), got {beta}")
    n = _halvings(u)
    return math.sqrt(n / rho * math.log(2.0 * n / beta))


def coverage_bounds(tau: float, n_cal: int, alpha: float) -> tuple[float, float]:
    """Band ``[1 - alpha - tau/(n+1), 1 - alpha + (tau+1)/(n+1)]`` on coverage."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    if n_cal < 1:
        raise DomainError(f"n_cal must be >= 1, got {n_cal}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    m = n_cal + 1
    return 1.0 - alpha - tau / m, 1.0 - alpha + (tau + 1.0) / m
