"""Gaussian naive Bayes, plain and differentially private.

The private fit perturbs sufficient statistics with Laplace noise, spending
``epsilon_f / 3`` on each of class counts, per-class feature sums and
per-class sums of squares (pure DP by basic composition). Neighbouring
datasets differ by replacing one record, so a record may move between
classes and every sensitivity below carries a factor of two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

VAR_FLOOR = 1e-6


@dataclass(frozen=True)
class GnbModel:
    priors: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K, d)
    is_private: bool = False
    epsilon_f: float | None = None

    @property
    def n_classes(self) -> int:
        return self.priors.size

    @property
    def n_features(self) -> int:
        return self.means.shape[1]


def _check_xy(features, labels):
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DomainError(f"features must be n x d with d >= 1, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DomainError(f"{y.size} labels for {X.shape[0]} rows")
    if y.size == 0 or y.min() < 0:
        raise DomainError("labels must be non-negative integers")
    return X, y.astype(int)


def fit_gnb(features, labels, n_classes: int | None = None) -> GnbModel:
    """Maximum-likelihood Gaussian naive Bayes for labels ``0..K-1``."""
    X, y = _check_xy(features, labels)
    K = n_classes or int(y.max()) + 1
    counts = np.bincount(y, minlength=K)
    if counts.min() < 2:
        raise DomainError(f"every class needs at least 2 samples, got counts {counts.tolist()}")
    means = np.stack([X[y == k].mean(axis=0) for k in range(K)])
    variances = np.stack([X[y == k].var(axis=0) for k in range(K)])
    return GnbModel(
        priors=counts / counts.sum(),
        means=means,
        variances=np.maximum(variances, VAR_FLOOR),
    )


def fit_dp_gnb(
    features,
    labels,
    epsilon_f: float,
    feature_bounds,
    rng: np.random.Generator,
    n_classes: int | None = None,
) -> GnbModel:
    """epsilon_f-DP Gaussian naive Bayes from noised sufficient statistics.

    ``feature_bounds`` is a sequence of ``(lo, hi)`` per feature, or a single
    pair applied to all features. Features are clipped into the bounds
    before any statistic is computed. ``n_classes`` should be supplied when
    the label alphabet is public; otherwise it is read off the labels.
    """
    if not epsilon_f > 0:
        raise DomainError(f"epsilon_f must be positive, got {epsilon_f}")
    X, y = _check_xy(features, labels)
    d = X.shape[1]
    b = np.asarray(feature_bounds, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (d, 1))
    if b.shape != (d, 2) or not np.all(np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
        raise DomainError("feature_bounds must give a finite (lo, hi), lo < hi, for every feature")
    K = n_classes or int(y.max()) + 1
    lo, hi = b[:, 0], b[:, 1]
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    Z = np.clip(X, lo, hi) - centre

    eps_part = epsilon_f / 3.0
    onehot = np.eye(K)[y]
    counts = onehot.sum(axis=0)
    sums = onehot.T @ Z
    sq_sums = onehot.T @ (Z * Z)
    counts = counts + rng.laplace(0.0, 2.0 / eps_part, size=K)
    sums = sums + rng.laplace(0.0, 2.0 * half.sum() / eps_part, size=(K, d))
    sq_sums = sq_sums + rng.laplace(0.0, 2.0 * (half * half).sum() / eps_part, size=(K, d))

    n_k = np.maximum(counts, 1.0)
    mean_z = np.clip(sums / n_k[:, None], -half, half)
    var = sq_sums / n_k[:, None] - mean_z * mean_z
    return GnbModel(
        priors=n_k / n_k.sum(),
        means=mean_z + centre,
        variances=np.maximum(var, VAR_FLOOR),
        is_private=True,
        epsilon_f=float(epsilon_f),
    )


def joint_log_likelihood(model: GnbModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if model.n_features == 1 else X[None, :]
    if X.shape[1] != model.n_features:
        raise DomainError(f"model has {model.n_features} features, input has {X.shape[1]}")
    v = model.variances
    log_norm = -0.5 * np.log(2.0 * np.pi * v).sum(axis=1)
    quad = (((X[:, None, :] - model.means) ** 2) / v).sum(axis=2)
    return np.log(model.priors) + log_norm - 0.5 * quad


def predict_proba(model: GnbModel, features) -> np.ndarray:
    jll = joint_log_likelihood(model, features)
    jll -= jll.max(axis=1, keepdims=True)
    p = np.exp(jll)
    return p / p.sum(axis=1, keepdims=True)


def predict(model: GnbModel, features) -> np.ndarray:
    # argmax breaks ties toward the lowest label
    return np.argmax(joint_log_likelihood(model, features), axis=1)


def accuracy(model: GnbModel, features, labels) -> float:
    y = np.asarray(labels)
    if y.size == 0:
        raise DomainError("nothing to score")
    return float(np.mean(predict(model, features) == y))
