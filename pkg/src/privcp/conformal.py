"""Split conformal prediction with hinge-loss scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .privacy import PrivacyBudget
from .quantile import (
    DEFAULT_BIN_GRID,
    DEFAULT_INFLATION_GRID,
    DEFAULT_PRECISION,
    MECHANISMS,
    QuantileResult,
    ScoreSet,
    exponq_quantile,
    exponq_tune,
    nonprivate_quantile,
    pcoqs_quantile,
)

ROW_SUM_TOL = 1e-9
SCORE_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class PredictionSet:
    labels: frozenset
    threshold_used: float

    def __len__(self):
        return len(self.labels)

    def __contains__(self, y):
        return y in self.labels


@dataclass(frozen=True)
class MetricsReport:
    coverage: float
    efficiency: float
    informativeness: float
    n_test: int


@dataclass(frozen=True)
class MechanismParams:
    """Knobs for the quantile mechanisms; unused fields are ignored.

    ``n_bins``/``inflation`` left as ``None`` makes ExponQ tune them over
    ``bin_grid`` x ``inflation_grid``.
    """

    precision: float = DEFAULT_PRECISION
    noiseless: bool = False
    inclusive_loop: bool = False
    skip_past_mid: bool = False
    release_right_end: bool = False
    n_bins: int | None = None
    inflation: float | None = None
    bin_grid: tuple = DEFAULT_BIN_GRID
    inflation_grid: tuple = DEFAULT_INFLATION_GRID


def _check_probabilities(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] < 1:
        raise DomainError(f"expected an n x K probability matrix, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError("probabilities must be finite")
    bad = np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"probability row {i} sums to {p[i].sum()!r}, not 1")
    return p


def _hinge(p: np.ndarray) -> np.ndarray:
    s = 1.0 - p
    if s.min() < -SCORE_CLAMP_TOL or s.max() > 1.0 + SCORE_CLAMP_TOL:
        raise DomainError("probabilities outside [0, 1] beyond rounding tolerance")
    return np.clip(s, 0.0, 1.0)


def hinge_scores(class_probabilities, true_labels) -> ScoreSet:
    """Scores ``1 - p_i[y_i]`` on ``[0, 1]``."""
    p = _check_probabilities(class_probabilities)
    y = np.asarray(true_labels)
    if y.shape != (p.shape[0],):
        raise DomainError(f"{y.size} labels for {p.shape[0]} probability rows")
    if y.size and (y.min() < 0 or y.max() >= p.shape[1]):
        raise DomainError(f"labels must lie in 0..{p.shape[1] - 1}")
    return ScoreSet(_hinge(p[np.arange(y.size), y]), 0.0, 1.0)


def prediction_mask(class_probabilities, threshold: float) -> np.ndarray:
    """Boolean n x K membership matrix, ``1 - p[y] <= threshold``."""
    p = _check_probabilities(class_probabilities)
    return _hinge(p) <= threshold


def prediction_set(prob_row, threshold: float) -> PredictionSet:
    mask = prediction_mask(prob_row, threshold)[0]
    return PredictionSet(frozenset(int(y) for y in np.flatnonzero(mask)), float(threshold))


def prediction_sets(class_probabilities, threshold: float) -> list[PredictionSet]:
    mask = prediction_mask(class_probabilities, threshold)
    return [PredictionSet(frozenset(int(y) for y in np.flatnonzero(m)), float(threshold)) for m in mask]


def evaluate_mask(mask: np.ndarray, true_labels) -> MetricsReport:
    """Coverage, mean set size and singleton fraction from a membership matrix."""
    mask = np.asarray(mask, dtype=bool)
    y = np.asarray(true_labels)
    if mask.ndim != 2 or y.shape != (mask.shape[0],):
        raise DomainError(f"{y.size} labels for {mask.shape[0]} prediction sets")
    if y.size == 0:
        raise DomainError("nothing to evaluate")
    sizes = mask.sum(axis=1)
    return MetricsReport(
        coverage=float(mask[np.arange(y.size), y].mean()),
        efficiency=float(sizes.mean()),
        informativeness=float((sizes == 1).mean()),
        n_test=int(y.size),
    )


def evaluate(sets: Sequence[PredictionSet], true_labels) -> MetricsReport:
    y = list(true_labels)
    if len(sets) != len(y):
        raise DomainError(f"{len(y)} labels for {len(sets)} prediction sets")
    if not y:
        raise DomainError("nothing to evaluate")
    n = len(y)
    sizes = [len(s) for s in sets]
    return MetricsReport(
        coverage=sum(yi in s for s, yi in zip(sets, y)) / n,
        efficiency=sum(sizes) / n,
        informativeness=sum(k == 1 for k in sizes) / n,
        n_test=n,
    )


def run_mechanism(
    scores: ScoreSet,
    alpha: float,
    method: str,
    budget: PrivacyBudget | None = None,
    params: MechanismParams | None = None,
    rng: np.random.Generator | None = None,
) -> QuantileResult:
    """Dispatch to one quantile mechanism.

    P-COQS spends ``budget.rho`` (zCDP); ExponQ spends ``budget.epsilon``
    (pure DP).
    """
    params = params or MechanismParams()
    if method not in MECHANISMS:
        raise DomainError(f"unknown method {method!r}; expected one of {MECHANISMS}")
    if method == "nonprivate":
        return nonprivate_quantile(scores, alpha)
    if budget is None and not (method == "pcoqs" and params.noiseless):
        raise DomainError(f"method {method!r} needs a privacy budget")
    if method == "pcoqs":
        return pcoqs_quantile(
            scores,
            alpha,
            params.precision,
            budget.rho if budget is not None else None,
            rng,
            noiseless=params.noiseless,
            inclusive_loop=params.inclusive_loop,
            skip_past_mid=params.skip_past_mid,
            release_right_end=params.release_right_end,
        )
    n_bins, inflation = params.n_bins, params.inflation
    if n_bins is None or inflation is None:
        tuned = exponq_tune(
            scores, alpha, budget.epsilon, params.bin_grid, params.inflation_grid, rng
        )
        n_bins = tuned.n_bins if n_bins is None else n_bins
        inflation = tuned.inflation if inflation is None else inflation
    return exponq_quantile(scores, alpha, budget.epsilon, n_bins, inflation, rng)


def calibrate(
    cal_probabilities,
    cal_labels,
    alpha: float,
    method: str = "pcoqs",
    budget: PrivacyBudget | None = None,
    mech_params: MechanismParams | None = None,
    rng: np.random.Generator | None = None,
) -> QuantileResult:
    """Score the calibration set and release a threshold."""
    scores = hinge_scores(cal_probabilities, cal_labels)
    return run_mechanism(scores, alpha, method, budget, mech_params, rng)
