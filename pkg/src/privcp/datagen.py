"""Two-class Gaussian benchmark data and the train/calibration/test splitter."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

DEFAULT_FRACTIONS = (0.60, 0.24, 0.16)


@dataclass(frozen=True)
class SyntheticSpec:
    """Class 0 ~ N(mu1 * 1, var1 * I), class 1 ~ N(mu2 * 1, var2 * I)."""

    n: int = 10_000
    dim: int = 8
    mu1: float = 0.8
    mu2: float = -1.0
    var1: float = 7.0
    var2: float = 8.0
    split_fractions: tuple = DEFAULT_FRACTIONS

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if self.dim < 1:
            raise DomainError(f"dim must be >= 1, got {self.dim}")
        if not (self.var1 > 0 and self.var2 > 0):
            raise DomainError("class variances must be positive")
        _check_fractions(self.split_fractions)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.labels.size

    def take(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx])


def _check_fractions(fractions):
    f = tuple(float(x) for x in fractions)
    if len(f) != 3 or min(f) <= 0 or abs(sum(f) - 1.0) > 1e-12:
        raise DomainError(f"split fractions must be three positives summing to 1, got {fractions}")
    return f


def generate(spec: SyntheticSpec, rng: np.random.Generator) -> Dataset:
    """Class-balanced sample: ceil(n/2) rows of class 0, floor(n/2) of class 1, shuffled."""
    n0 = (spec.n + 1) // 2
    n1 = spec.n - n0
    x0 = spec.mu1 + math.sqrt(spec.var1) * rng.standard_normal((n0, spec.dim))
    x1 = spec.mu2 + math.sqrt(spec.var2) * rng.standard_normal((n1, spec.dim))
    X = np.concatenate([x0, x1])
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    order = rng.permutation(spec.n)
    return Dataset(X[order], y[order])


def split_sizes(n: int, fractions=DEFAULT_FRACTIONS) -> tuple[int, int, int]:
    """``floor(f * n)`` for calibration and test; the remainder goes to training."""
    _, f_cal, f_test = _check_fractions(fractions)
    n_cal = math.floor(f_cal * n + 1e-9)
    n_test = math.floor(f_test * n + 1e-9)
    n_train = n - n_cal - n_test
    if min(n_train, n_cal, n_test) < 1:
        raise DomainError(f"n={n} leaves an empty partition with fractions {fractions}")
    return n_train, n_cal, n_test


def split(dataset: Dataset, fractions, rng: np.random.Generator) -> tuple[Dataset, Dataset, Dataset]:
    if len(dataset) == 0:
        raise DomainError("cannot split an empty dataset")
    n_train, n_cal, _ = split_sizes(len(dataset), fractions)
    perm = rng.permutation(len(dataset))
    return (
        dataset.take(perm[:n_train]),
        dataset.take(perm[n_train : n_train + n_cal]),
        dataset.take(perm[n_train + n_cal :]),
    )


def write_csv(dataset: Dataset, path) -> None:
    """CSV with header ``f0..f{d-1},label``; floats in repr form."""
    path = Path(path)
    d = dataset.features.shape[1]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{j}" for j in range(d)] + ["label"])
            for x, y in zip(dataset.features, dataset.labels):
                w.writerow([repr(float(v)) for v in x] + [int(y)])
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> Dataset:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(data[:, :-1], data[:, -1].astype(int))
