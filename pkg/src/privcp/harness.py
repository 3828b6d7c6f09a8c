"""Replicated experiments on the synthetic benchmark.

One replication generates a dataset, splits it 60/24/16, fits a classifier,
releases a conformal threshold from the calibration split and scores the
prediction sets on the test split. ``run_experiment`` repeats this over
independent seeded streams and aggregates.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import conformal, datagen, models
from . import rng as streams
from .errors import ConfigError, DomainError
from .privacy import DEFAULT_DP_DELTA, PrivacyBudget
from .quantile import DEFAULT_BIN_GRID, DEFAULT_INFLATION_GRID, DEFAULT_PRECISION, MECHANISMS, ScoreSet

MODELS = ("gnb", "dp_gnb")
SWEEP_AXES = ("epsilon_cp", "n", "alpha", "epsilon_f")
METRICS = ("coverage", "efficiency", "informativeness", "accuracy", "time")

CSV_HEADER = (
    "sweep_axis,sweep_value,method,coverage_mean,coverage_disp,efficiency_mean,efficiency_disp,"
    "informativeness_mean,informativeness_disp,accuracy_mean,accuracy_disp,time_mean_s,time_disp_s,"
    "replications,base_seed"
).split(",")
TIMING_COLUMNS = ("time_mean_s", "time_disp_s")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "pcoqs"
    model: str = "gnb"
    alpha: float = 0.1
    epsilon_cp: float = 1.0
    epsilon_f: float = 2.0
    n: int = 10_000
    replications: int = 1000
    precision: float = DEFAULT_PRECISION
    score_bounds: tuple = (0.0, 1.0)
    base_seed: int = 0
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    dim: int = 8
    dp_delta: float = DEFAULT_DP_DELTA
    feature_bounds: tuple = (-12.0, 12.0)
    inclusive_loop: bool = False
    skip_past_mid: bool = False
    release_right_end: bool = False
    bin_grid: tuple = DEFAULT_BIN_GRID
    inflation_grid: tuple = DEFAULT_INFLATION_GRID

    def __post_init__(self):
        for name in ("score_bounds", "sweep_values", "feature_bounds", "bin_grid", "inflation_grid"):
            v = getattr(self, name)
            if isinstance(v, list):
                object.__setattr__(self, name, tuple(v))
        self.validate()

    def validate(self):
        if self.method not in MECHANISMS:
            raise ConfigError(f"method must be one of {MECHANISMS}, got {self.method!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if not (self.epsilon_cp > 0 and self.epsilon_f > 0):
            raise ConfigError("privacy budgets must be positive")
        if not self.precision > 0:
            raise ConfigError(f"precision must be positive, got {self.precision}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError(f"replications must be a positive integer, got {self.replications}")
        if len(self.score_bounds) != 2 or not self.score_bounds[0] <= 0.0 < 1.0 <= self.score_bounds[1]:
            raise ConfigError(f"score_bounds must contain [0, 1], got {self.score_bounds}")
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        try:
            n_train, _, _ = datagen.split_sizes(int(self.n))
            datagen.SyntheticSpec(n=int(self.n), dim=self.dim)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        if n_train < 4:
            raise ConfigError(f"n={self.n} leaves too few training rows to fit a model")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        d = dataclasses.asdict(self)
        d.update(overrides)
        return ExperimentConfig.from_dict(d)


def parse_override(text: str) -> tuple[str, object]:
    """``key=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config(path=None, overrides: Iterable[str] = (), env: dict | None = None) -> ExperimentConfig:
    """Config file, then ``PCOQS_SEED`` from ``env``, then ``key=value`` overrides."""
    d = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    if env and env.get("PCOQS_SEED"):
        try:
            d["base_seed"] = int(env["PCOQS_SEED"])
        except ValueError as exc:
            raise ConfigError(f"PCOQS_SEED must be an integer, got {env['PCOQS_SEED']!r}") from exc
    for item in overrides:
        k, v = parse_override(item)
        d[k] = v
    return ExperimentConfig.from_dict(d)


@dataclass(frozen=True)
class ResultRow:
    sweep_axis: str | None
    sweep_value: float | None
    method: str
    means: dict
    variances: dict
    replications: int
    base_seed: int

    def std(self, metric: str) -> float:
        return math.sqrt(self.variances[metric])

    def mc_stderr(self, metric: str) -> float:
        """Monte Carlo standard error of ``means[metric]``."""
        return math.sqrt(self.variances[metric] / self.replications)

    def flat(self) -> dict:
        out = {
            "sweep_axis": self.sweep_axis or "none",
            "sweep_value": self.sweep_value,
            "method": self.method,
        }
        for m in METRICS:
            suffix = "_s" if m == "time" else ""
            out[f"{m}_mean{suffix}"] = self.means[m]
            out[f"{m}_disp{suffix}"] = self.variances[m]
        out["replications"] = self.replications
        out["base_seed"] = self.base_seed
        return out


@dataclass
class _Replicates:
    values: dict = field(default_factory=lambda: {m: [] for m in METRICS})

    def add(self, **kw):
        for k, v in kw.items():
            self.values[k].append(v)

    def row(self, config: ExperimentConfig, axis=None, value=None) -> ResultRow:
        means, variances = {}, {}
        for m, xs in self.values.items():
            a = np.asarray(xs, dtype=float)
            means[m] = float(a.mean())
            variances[m] = float(a.var(ddof=1)) if a.size > 1 else 0.0
        return ResultRow(axis, value, config.method, means, variances, config.replications, config.base_seed)


def _replicate(config: ExperimentConfig, h: int, warmup: bool) -> dict:
    seed = config.base_seed
    spec = datagen.SyntheticSpec(n=int(config.n), dim=config.dim)
    data = datagen.generate(spec, streams.stream(seed, h, streams.DATA))
    train, cal, test = datagen.split(data, spec.split_fractions, streams.stream(seed, h, streams.SPLIT))
    if config.model == "dp_gnb":
        model = models.fit_dp_gnb(
            train.features,
            train.labels,
            config.epsilon_f,
            config.feature_bounds,
            streams.stream(seed, h, streams.MODEL),
            n_classes=2,
        )
    else:
        model = models.fit_gnb(train.features, train.labels, n_classes=2)

    cal_scores = conformal.hinge_scores(models.predict_proba(model, cal.features), cal.labels)
    scores = ScoreSet(cal_scores.values, *config.score_bounds)
    budget = PrivacyBudget.from_epsilon(config.epsilon_cp, config.dp_delta)
    params = conformal.MechanismParams(
        precision=config.precision,
        inclusive_loop=config.inclusive_loop,
        skip_past_mid=config.skip_past_mid,
        release_right_end=config.release_right_end,
        bin_grid=tuple(config.bin_grid),
        inflation_grid=tuple(config.inflation_grid),
    )
    if warmup:
        conformal.run_mechanism(
            scores, config.alpha, config.method, budget, params, streams.stream(seed, h, streams.WARMUP)
        )
    mech_rng = streams.stream(seed, h, streams.MECHANISM)
    t0 = time.perf_counter()
    q = conformal.run_mechanism(scores, config.alpha, config.method, budget, params, mech_rng)
    elapsed = time.perf_counter() - t0

    test_probs = models.predict_proba(model, test.features)
    report = conformal.evaluate_mask(conformal.prediction_mask(test_probs, q.threshold), test.labels)
    return dict(
        coverage=report.coverage,
        efficiency=report.efficiency,
        informativeness=report.informativeness,
        accuracy=models.accuracy(model, test.features, test.labels),
        time=elapsed,
    )


def _run(config: ExperimentConfig, warmup: bool, axis=None, value=None) -> ResultRow:
    config.validate()
    reps = _Replicates()
    for h in range(int(config.replications)):
        reps.add(**_replicate(config, h, warmup))
    return reps.row(config, axis, value)


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run ``config.replications`` replications and aggregate them into one row.

    Replication ``h`` draws every random quantity from streams keyed by
    ``(base_seed, h)``, so the result is deterministic and does not depend
    on which other experiments ran before it. Each replication draws fresh
    mechanism noise.
    """
    return [_run(config, warmup=False)]


def sweep(config: ExperimentConfig, axis: str, values: Sequence) -> list[ResultRow]:
    """One experiment per value of ``axis``, all sharing ``config.base_seed``.

    Sharing the seed gives common random numbers across values (identical
    datasets and splits), so differences between rows reflect the swept
    parameter only.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if len(values) == 0:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for v in values:
        v = int(v) if axis == "n" else float(v)
        cfg = config.with_overrides({axis: v, "sweep_axis": axis, "sweep_values": tuple(values)})
        rows.append(_run(cfg, warmup=False, axis=axis, value=v))
    return rows


def bench_timing(config: ExperimentConfig) -> ResultRow:
    """Mechanism wall time, each timed call preceded by an untimed warm-up call."""
    return _run(config, warmup=True)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def _round6(v):
    if isinstance(v, float) and math.isfinite(v):
        return float(f"{v:.6g}")
    return v


def render(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if not rows:
        raise DomainError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            flat = r.flat()
            w.writerow([_fmt(flat[k]) for k in CSV_HEADER])
        return buf.getvalue()
    if fmt == "json":
        out = []
        for r in rows:
            obj = {k: _round6(v) for k, v in r.flat().items()}
            for m in METRICS:
                suffix = "_s" if m == "time" else ""
                obj[f"{m}_std{suffix}"] = _round6(r.std(m))
            out.append(obj)
        return json.dumps(out, indent=2) + "\n"
    raise DomainError(f"unknown format {fmt!r}; expected csv or json")


def emit(rows: Sequence[ResultRow], fmt: str, path) -> Path:
    """Write ``rows`` as CSV or JSON to ``path``."""
    text = render(rows, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror or exc}") from exc
    return path


def read_rows(path) -> list[dict]:
    """Parse an emitted CSV or JSON file back into flat dicts of floats."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("["):
        return json.loads(text)
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in rec.items():
            if k in ("sweep_axis", "method"):
                parsed[k] = v
            elif v == "":
                parsed[k] = None
            else:
                parsed[k] = float(v)
        rows.append(parsed)
    return rows
