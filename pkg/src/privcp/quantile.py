"""Conformal quantile mechanisms.

Three ways of turning calibration scores into a threshold:

* ``nonprivate`` -- the order statistic used by split conformal prediction.
* ``pcoqs`` -- noisy binary search over the score interval. Every step asks
  a Gaussian-noised range count, and the noise is sized so the whole search
  costs ``rho`` under zCDP.
* ``exponq`` -- exponential mechanism over the upper edges of a uniform
  binning, aimed at an inflated rank, with a grid search for the number of
  bins and the inflation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import privacy
from .errors import DomainError
from .privacy import NoiseSpec

MECHANISMS = ("nonprivate", "pcoqs", "exponq")
DEFAULT_PRECISION = 1e-10
DEFAULT_BIN_GRID = (100, 500, 1000, 5000)
DEFAULT_INFLATION_GRID = (0.0, 0.01, 0.02, 0.05)

# slack for products like 0.9 * 10 landing a few ulps above an integer
_CEIL_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Non-conformity scores known to lie in ``[lower, upper]``.

    Scores outside the bounds are rejected rather than clipped; clipping
    would silently change the sensitivity the mechanisms rely on.
    """

    values: np.ndarray
    lower: float = 0.0
    upper: float = 1.0
    sorted_values: np.ndarray = field(init=False, repr=False)
    # same order statistics as a list; bisect on it is far cheaper than scalar searchsorted
    sorted_list: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("score set is empty")
        if not self.lower < self.upper:
            raise DomainError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if not np.all(np.isfinite(v)):
            raise DomainError("scores must be finite")
        if v.min() < self.lower or v.max() > self.upper:
            raise DomainError(
                f"scores span [{v.min()}, {v.max()}], outside bounds [{self.lower}, {self.upper}]"
            )
        v.setflags(write=False)
        s = np.sort(v)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        object.__setattr__(self, "sorted_values", s)
        object.__setattr__(self, "sorted_list", s.tolist())

    def __len__(self):
        return self.values.size

    def rank_of(self, threshold: float) -> int:
        """Number of scores less than or equal to ``threshold``."""
        return int(np.searchsorted(self.sorted_values, threshold, side="right"))


@dataclass(frozen=True)
class QuantileResult:
    threshold: float
    mechanism: str
    target_rank: int
    iterations_used: int = 0
    noise_sd: float = 0.0
    n_bins: int | None = None
    inflation: float | None = None
    # (mid, noisy count, moved_right) per search step, when requested
    trace: tuple = ()


class ExponqTuning(NamedTuple):
    n_bins: int
    inflation: float
    feasible: bool


def target_rank(n_cal: int, alpha: float) -> int:
    """``ceil((1 - alpha)(n_cal + 1))`` clamped to ``n_cal``."""
    if n_cal < 1:
        raise DomainError(f"n_cal must be >= 1, got {n_cal}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    r = math.ceil((1.0 - alpha) * (n_cal + 1) - _CEIL_SLACK)
    return max(1, min(r, n_cal))


def _halvings(ratio: float) -> int:
    """Smallest N >= 0 with ratio / 2**N <= 1."""
    if ratio <= 1:
        return 0
    n = max(0, math.ceil(math.log2(ratio)))
    # log2 can be off by one ulp around powers of two
    while n > 0 and math.ldexp(ratio, -(n - 1)) <= 1:
        n -= 1
    while math.ldexp(ratio, -n) > 1:
        n += 1
    return n


def max_iterations(lower: float, upper: float, precision: float) -> int:
    """Search steps needed to shrink ``[lower, upper]`` to width ``precision``."""
    if not lower < upper:
        raise DomainError(f"need lower < upper, got [{lower}, {upper}]")
    if not precision > 0:
        raise DomainError(f"precision must be positive, got {precision}")
    return _halvings((upper - lower) / precision)


def nonprivate_quantile(scores: ScoreSet, alpha: float) -> QuantileResult:
    r = target_rank(len(scores), alpha)
    return QuantileResult(
        threshold=float(scores.sorted_values[r - 1]),
        mechanism="nonprivate",
        target_rank=r,
    )


def pcoqs_quantile(
    scores: ScoreSet,
    alpha: float,
    precision: float = DEFAULT_PRECISION,
    rho: float | None = None,
    rng: np.random.Generator | None = None,
    *,
    noiseless: bool = False,
    inclusive_loop: bool = False,
    skip_past_mid: bool = False,
    release_right_end: bool = False,
    record_trace: bool = False,
) -> QuantileResult:
    """Private conformal quantile by noisy binary search (rho-zCDP).

    Parameters
    ----------
    scores : ScoreSet
        Calibration scores with known bounds ``[a, b]``.
    alpha : float
        Miscoverage level; the search targets rank ``ceil((1-alpha)(n+1))``.
    precision : float
        Interval tolerance. Fixes the number of steps
        ``N = ceil(log2((b - a) / precision))``.
    rho : float
        Total zCDP budget. Ignored when ``noiseless`` is set.
    rng : numpy.random.Generator
        Noise source. Required unless ``noiseless``.
    noiseless : bool
        Use exact counts. Test oracle only; the output is not private.
    inclusive_loop : bool
        Run ``N + 1`` steps (loop while ``i <= N``) instead of ``N``, with
        the budget split over ``N + 1`` calls so accounting stays exact.
    skip_past_mid : bool
        On a low count move ``left`` to ``mid + precision`` instead of
        ``mid``. The jump can step over the target when it sits within
        ``precision`` of ``mid``, so the noiseless result may miss the
        order statistic by slightly more than ``precision``.
    release_right_end : bool
        Return the right end of the final interval instead of its midpoint.
        The right end always covers at least ``r - tau`` scores, even when
        scores pile up on a single value such as ``b``; the midpoint can
        fall just below such a pile and lose all of it.
    record_trace : bool
        Keep ``(mid, noisy_count, moved_right)`` for every step.

    Returns
    -------
    QuantileResult
        ``threshold`` is the midpoint of the final interval (or its right
        end), clamped into ``[a, b]``.
    """
    r = target_rank(len(scores), alpha)
    n_steps = max_iterations(scores.lower, scores.upper, precision)
    calls = n_steps + 1 if inclusive_loop else n_steps
    if calls == 0:
        return QuantileResult(
            threshold=0.5 * (scores.lower + scores.upper),
            mechanism="pcoqs",
            target_rank=r,
        )
    if noiseless:
        noise = NoiseSpec.noiseless(calls)
    else:
        if rho is None:
            raise DomainError("rho is required unless noiseless=True")
        if rng is None:
            raise DomainError("an rng is required for the private search")
        noise = NoiseSpec.for_budget(rho, calls)

    lower = scores.lower
    left, right = lower, scores.upper
    trace = []
    for _ in range(calls):
        mid = 0.5 * (left + right)
        c = privacy.noisy_range_count(scores, lower, mid, noise, rng)
        moved_right = c < r
        if moved_right:
            left = mid + precision if skip_past_mid else mid
        else:
            right = mid
        if record_trace:
            trace.append((mid, c, moved_right))
    q = right if release_right_end else 0.5 * (left + right)
    q = min(max(q, scores.lower), scores.upper)
    return QuantileResult(
        threshold=q,
        mechanism="pcoqs",
        target_rank=r,
        iterations_used=calls,
        noise_sd=noise.sd,
        trace=tuple(trace),
    )


def inflated_rank(n_cal: int, alpha: float, inflation: float) -> int:
    """Rank aimed at by ExponQ; values past ``n_cal`` are clamped."""
    if inflation < 0:
        raise DomainError(f"inflation must be >= 0, got {inflation}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    r = math.ceil((1.0 - alpha + inflation) * (n_cal + 1) - _CEIL_SLACK)
    return max(1, min(r, n_cal))


def _bin_edges(lower: float, upper: float, n_bins: int) -> np.ndarray:
    edges = lower + (upper - lower) * (np.arange(1, n_bins + 1) / n_bins)
    edges[-1] = upper
    return edges


def _exponq_distribution(scores: ScoreSet, rank: int, epsilon: float, n_bins: int):
    """Edges, their calibration ranks, and the cumulative sampling weights."""
    edges = _bin_edges(scores.lower, scores.upper, n_bins)
    ranks = np.searchsorted(scores.sorted_values, edges, side="right")
    # utility -|rank - target| has sensitivity 1
    logw = -0.5 * epsilon * np.abs(ranks - rank)
    cdf = np.cumsum(np.exp(logw - logw.max()))
    return edges, ranks, cdf


def _draw(cdf: np.ndarray, rng: np.random.Generator, size=None):
    u = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


def exponq_quantile(
    scores: ScoreSet,
    alpha: float,
    epsilon: float,
    n_bins: int,
    inflation: float,
    rng: np.random.Generator,
) -> QuantileResult:
    """Exponential-mechanism quantile over uniform bin edges (epsilon-DP)."""
    if n_bins < 2:
        raise DomainError(f"n_bins must be >= 2, got {n_bins}")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    rank = inflated_rank(len(scores), alpha, inflation)
    edges, _, cdf = _exponq_distribution(scores, rank, epsilon, n_bins)
    j = int(_draw(cdf, rng))
    return QuantileResult(
        threshold=float(edges[j]),
        mechanism="exponq",
        target_rank=rank,
        n_bins=int(n_bins),
        inflation=float(inflation),
    )


def exponq_tune(
    scores: ScoreSet,
    alpha: float,
    epsilon: float,
    bin_grid: Sequence[int] = DEFAULT_BIN_GRID,
    inflation_grid: Sequence[float] = DEFAULT_INFLATION_GRID,
    rng: np.random.Generator | None = None,
    *,
    n_draws: int = 500,
    shortfall_prob: float = 0.01,
) -> ExponqTuning:
    """Grid search for the ExponQ bin count and rank inflation.

    Each grid point is scored with ``n_draws`` mechanism draws on the
    calibration scores. A point is feasible when, in all but a
    ``shortfall_prob`` fraction of draws, the drawn edge covers at least
    ``ceil((1-alpha)(n+1))`` calibration scores. Among feasible points the
    one with the smallest mean drawn threshold wins, ties going to the first
    in grid order. If nothing is feasible the largest inflation is returned
    with ``feasible=False``.

    The search reads the calibration scores directly; its privacy cost is
    not accounted for.
    """
    if len(bin_grid) == 0 or len(inflation_grid) == 0:
        raise DomainError("tuning grids must be nonempty")
    if rng is None:
        raise DomainError("an rng is required for tuning")
    n = len(scores)
    r = target_rank(n, alpha)
    k = int(math.floor(shortfall_prob * n_draws))

    best = None  # (mean threshold, n_bins, inflation)
    fallback = None  # (-coverage quantile, mean threshold, n_bins, inflation)
    max_infl = max(inflation_grid)
    for n_bins in bin_grid:
        if n_bins < 2:
            raise DomainError(f"n_bins must be >= 2, got {n_bins}")
        for infl in inflation_grid:
            rank = inflated_rank(n, alpha, infl)
            edges, ranks, cdf = _exponq_distribution(scores, rank, epsilon, n_bins)
            idx = _draw(cdf, rng, n_draws)
            drawn_ranks = np.sort(ranks[idx])
            mean_t = float(edges[idx].mean())
            if drawn_ranks[k] >= r:
                if best is None or mean_t < best[0]:
                    best = (mean_t, n_bins, infl)
            elif infl == max_infl:
                key = (-int(drawn_ranks[k]), mean_t, n_bins, infl)
                if fallback is None or key < fallback:
                    fallback = key
    if best is not None:
        return ExponqTuning(int(best[1]), float(best[2]), True)
    return ExponqTuning(int(fallback[2]), float(fallback[3]), False)
