"""Privacy accounting and the Gaussian range-count primitive.

Budgets are tracked under zero-concentrated DP (rho-zCDP). All logarithms
in this module are natural logarithms.

Noise is drawn from a :class:`numpy.random.Generator` backed by PCG64. The
Gaussian transform is numpy's ziggurat ``standard_normal``; a draw with
standard deviation ``sd`` is ``sd * rng.standard_normal()``. Seeded replays
are bit-stable for a fixed numpy version.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import DomainError

if TYPE_CHECKING:
    from .quantile import ScoreSet

DEFAULT_DP_DELTA = 1e-5


def rho_to_epsilon(rho: float, dp_delta: float) -> float:
    """Convert a rho-zCDP guarantee to (epsilon, dp_delta)-DP.

    Returns ``rho + 2 * sqrt(rho * log(1 / dp_delta))``.

    Raises
    ------
    DomainError
        If ``rho <= 0`` or ``dp_delta`` is not in (0, 1).
    """
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if not 0 < dp_delta < 1:
        raise DomainError(f"dp_delta must be in (0, 1), got {dp_delta}")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / dp_delta))


def epsilon_to_rho(epsilon: float, convention: str = "identity") -> float:
    """Map a pure epsilon-DP budget to a zCDP budget.

    The default ``"identity"`` convention sets ``rho = epsilon``, which is how
    the benchmark budgets are stated. ``"half_square"`` gives the standard
    implication epsilon-DP => (epsilon**2 / 2)-zCDP and is offered so the
    mapping can be swapped in one place.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if convention == "identity":
        return float(epsilon)
    if convention == "half_square":
        return 0.5 * epsilon * epsilon
    raise DomainError(f"unknown epsilon->rho convention: {convention!r}")


def rho_to_pure_epsilon(rho: float, convention: str = "identity") -> float:
    """Inverse of :func:`epsilon_to_rho` (the pure-DP reading of a zCDP budget)."""
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if convention == "identity":
        return float(rho)
    if convention == "half_square":
        return math.sqrt(2.0 * rho)
    raise DomainError(f"unknown epsilon->rho convention: {convention!r}")


@dataclass(frozen=True)
class PrivacyBudget:
    """A privacy budget expressed in all three parametrisations.

    ``dp_delta`` is the failure probability used when reporting an
    approximate-DP epsilon; it is unrelated to the binary-search precision.
    """

    rho: float
    epsilon: float
    dp_delta: float = DEFAULT_DP_DELTA

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.dp_delta < 1:
            raise DomainError(f"dp_delta must be in (0, 1), got {self.dp_delta}")

    @classmethod
    def from_epsilon(cls, epsilon: float, dp_delta: float = DEFAULT_DP_DELTA) -> "PrivacyBudget":
        return cls(rho=epsilon_to_rho(epsilon), epsilon=float(epsilon), dp_delta=dp_delta)

    @classmethod
    def from_rho(cls, rho: float, dp_delta: float = DEFAULT_DP_DELTA) -> "PrivacyBudget":
        return cls(rho=float(rho), epsilon=rho_to_pure_epsilon(rho), dp_delta=dp_delta)

    @property
    def approx_epsilon(self) -> float:
        """Epsilon of the (epsilon, dp_delta)-DP guarantee implied by ``rho``."""
        return rho_to_epsilon(self.rho, self.dp_delta)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-call Gaussian noise for a budget split over ``calls_budgeted`` calls."""

    sd: float
    calls_budgeted: int

    def __post_init__(self):
        if not self.sd >= 0:
            raise DomainError(f"noise sd must be non-negative, got {self.sd}")
        if self.calls_budgeted < 1:
            raise DomainError(f"calls_budgeted must be >= 1, got {self.calls_budgeted}")

    @classmethod
    def for_budget(cls, rho: float, n_calls: int) -> "NoiseSpec":
        return cls(sd=per_call_noise_sd(rho, n_calls), calls_budgeted=n_calls)

    @classmethod
    def noiseless(cls, n_calls: int = 1) -> "NoiseSpec":
        """Exact counting oracle. For tests only: releases the true count."""
        return cls(sd=0.0, calls_budgeted=n_calls)

    @property
    def rho_per_call(self) -> float:
        return gaussian_zcdp(self.sd)


def per_call_noise_sd(rho: float, n_calls: int) -> float:
    """Standard deviation ``sqrt(n_calls / (2 rho))`` for unit-sensitivity counts."""
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if n_calls < 1:
        raise DomainError(f"n_calls must be >= 1, got {n_calls}")
    return math.sqrt(n_calls / (2.0 * rho))


def gaussian_zcdp(sd: float, sensitivity: float = 1.0) -> float:
    """zCDP cost ``sensitivity**2 / (2 sd**2)`` of one Gaussian release."""
    if sd == 0:
        return math.inf
    return sensitivity * sensitivity / (2.0 * sd * sd)


def compose_zcdp(costs: Iterable[float]) -> float:
    """Sequential composition: zCDP costs add."""
    return math.fsum(costs)


def noisy_range_count(
    scores: "ScoreSet",
    lower: float,
    upper: float,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> float:
    """Count scores in the closed interval ``[lower, upper]`` and add Gaussian noise.

    With ``noise.sd == 0`` the exact count is returned and ``rng`` is not
    advanced.
    """
    if lower > upper:
        raise DomainError(f"empty range: lower={lower} > upper={upper}")
    s = scores.sorted_list
    count = bisect_right(s, upper) - bisect_left(s, lower)
    if noise.sd == 0:
        return float(count)
    return count + noise.sd * rng.standard_normal()
