"""Bayesian calibration of human annotation scores.

Two generative models remove annotator bias from raw scores:

* star: per-conversation scores; mu_i ~ U(1,4), M_i ~ N(mu_i, 1),
  B_j ~ N(0,1), score S_ij ~ N(M_i + B_j, 1). The calibrated quality of
  model i is the posterior mean of M_i.
* binary: per-utterance-pair labels; M_i, B_j, T_k ~ N(0,1),
  label S_ijk ~ Bernoulli(sigmoid(M_i + B_j + T_k)). The calibrated rate is
  the posterior mean of sigmoid(M_i), turn bias T_k included.

Inference is random-walk Metropolis with per-coordinate Gaussian proposals;
the scalar step multiplier adapts during warmup only, targeting 0.25-0.45
acceptance, so the post-warmup chain has a fixed kernel. Seeded runs are
bit-reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ChainInitError, InputError
from .quadrature import sigmoid

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)

STAR_WARMUP = 50
STAR_DRAWS = 150
BINARY_WARMUP = 30
BINARY_DRAWS = 100


def _check_dense(name: str, indices: Sequence[int], declared: int | None) -> int:
    present = set(indices)
    if any(i < 0 for i in present):
        raise InputError(f"{name} indices must be nonnegative")
    if declared is None:
        if not present:
            raise InputError(f"cannot infer {name} count from no observations")
        count = max(present) + 1
    else:
        count = declared
        if present and max(present) >= count:
            raise InputError(f"{name} index out of declared range")
    missing = set(range(count)) - present
    if declared is None and missing:
        raise InputError(f"{name} indices must be dense, missing {sorted(missing)}")
    return count


@dataclass(frozen=True)
class StarObservations:
    """Sparse (model, annotator, score) triples with dense index spaces."""

    rows: tuple[tuple[int, int, float], ...]
    n_models: int
    n_annotators: int

    def __post_init__(self):
        for _, _, score in self.rows:
            if not math.isfinite(score):
                raise InputError("scores must be finite")
        n_m = _check_dense("model", [r[0] for r in self.rows], None)
        n_a = _check_dense("annotator", [r[1] for r in self.rows], None)
        if (n_m, n_a) != (self.n_models, self.n_annotators):
            raise InputError("declared counts do not match observation indices")

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[int, int, float]]) -> "StarObservations":
        rows = tuple((int(i), int(j), float(s)) for i, j, s in rows)
        if not rows:
            raise InputError("star model needs at least one observation per model")
        n_m = max(r[0] for r in rows) + 1
        n_a = max(r[1] for r in rows) + 1
        return cls(rows, n_m, n_a)


@dataclass(frozen=True)
class BinaryObservations:
    """Sparse (model, annotator, turn, label) rows; empty rows allowed when
    the latent counts are given explicitly."""

    rows: tuple[tuple[int, int, int, int], ...]
    n_models: int
    n_annotators: int
    n_turns: int

    def __post_init__(self):
        for _, _, _, label in self.rows:
            if label not in (0, 1):
                raise InputError("labels must be 0 or 1")
        _check_dense("model", [r[0] for r in self.rows], self.n_models)
        _check_dense("annotator", [r[1] for r in self.rows], self.n_annotators)
        _check_dense("turn", [r[2] for r in self.rows], self.n_turns)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[int, int, int, int]]) -> "BinaryObservations":
        rows = tuple((int(i), int(j), int(k), int(s)) for i, j, k, s in rows)
        if not rows:
            raise InputError("cannot infer latent counts from no observations")
        return cls(
            rows,
            max(r[0] for r in rows) + 1,
            max(r[1] for r in rows) + 1,
            max(r[2] for r in rows) + 1,
        )


@dataclass(frozen=True)
class StarModelState:
    mu: tuple[float, ...]
    m: tuple[float, ...]
    b: tuple[float, ...]

    def pack(self) -> np.ndarray:
        return np.array(self.mu + self.m + self.b, dtype=np.float64)

    @classmethod
    def unpack(cls, vector: np.ndarray, n_models: int, n_annotators: int) -> "StarModelState":
        if vector.shape != (2 * n_models + n_annotators,):
            raise InputError("state vector has wrong length")
        return cls(
            tuple(vector[:n_models]),
            tuple(vector[n_models:2 * n_models]),
            tuple(vector[2 * n_models:]),
        )


@dataclass(frozen=True)
class BinaryModelState:
    m: tuple[float, ...]
    b: tuple[float, ...]
    t: tuple[float, ...]

    def pack(self) -> np.ndarray:
        return np.array(self.m + self.b + self.t, dtype=np.float64)

    @classmethod
    def unpack(
        cls, vector: np.ndarray, n_models: int, n_annotators: int, n_turns: int
    ) -> "BinaryModelState":
        if vector.shape != (n_models + n_annotators + n_turns,):
            raise InputError("state vector has wrong length")
        return cls(
            tuple(vector[:n_models]),
            tuple(vector[n_models:n_models + n_annotators]),
            tuple(vector[n_models + n_annotators:]),
        )


def log_joint_star(state: StarModelState, obs: StarObservations) -> float:
    """Log density of latents and observations under the star-score model."""
    if len(state.mu) != obs.n_models or len(state.m) != obs.n_models:
        raise InputError("state does not match observation dimensions")
    if len(state.b) != obs.n_annotators:
        raise InputError("state does not match observation dimensions")
    mu = np.asarray(state.mu)
    m = np.asarray(state.m)
    b = np.asarray(state.b)
    if np.any(mu < 1.0) or np.any(mu > 4.0):
        return -math.inf
    total = -obs.n_models * math.log(3.0)
    total += float(np.sum(-0.5 * (m - mu) ** 2 - HALF_LOG_2PI))
    total += float(np.sum(-0.5 * b ** 2 - HALF_LOG_2PI))
    for i, j, score in obs.rows:
        resid = score - m[i] - b[j]
        total += -0.5 * resid * resid - HALF_LOG_2PI
    return total


def log_joint_binary(state: BinaryModelState, obs: BinaryObservations) -> float:
    """Log density under the Bernoulli utterance-pair model."""
    if (len(state.m), len(state.b), len(state.t)) != (
        obs.n_models, obs.n_annotators, obs.n_turns
    ):
        raise InputError("state does not match observation dimensions")
    m = np.asarray(state.m)
    b = np.asarray(state.b)
    t = np.asarray(state.t)
    total = float(
        np.sum(-0.5 * m ** 2 - HALF_LOG_2PI)
        + np.sum(-0.5 * b ** 2 - HALF_LOG_2PI)
        + np.sum(-0.5 * t ** 2 - HALF_LOG_2PI)
    )
    for i, j, k, label in obs.rows:
        eta = m[i] + b[j] + t[k]
        # log sigmoid(eta) if label else log(1 - sigmoid(eta)), stably
        total += -np.logaddexp(0.0, -eta) if label == 1 else -np.logaddexp(0.0, eta)
    return float(total)


def _star_log_joint_packed(obs: StarObservations) -> Callable[[np.ndarray], float]:
    n_m = obs.n_models
    i_idx = np.array([r[0] for r in obs.rows], dtype=np.intp)
    j_idx = np.array([r[1] for r in obs.rows], dtype=np.intp)
    scores = np.array([r[2] for r in obs.rows])
    n_terms = n_m + obs.n_annotators + len(obs.rows)  # m, b, obs normals
    const = -n_m * math.log(3.0) - n_terms * HALF_LOG_2PI

    def log_joint(v: np.ndarray) -> float:
        mu = v[:n_m]
        m = v[n_m:2 * n_m]
        b = v[2 * n_m:]
        if np.any(mu < 1.0) or np.any(mu > 4.0):
            return -math.inf
        total = const - 0.5 * float(np.sum((m - mu) ** 2)) - 0.5 * float(np.sum(b ** 2))
        resid = scores - m[i_idx] - b[j_idx]
        return total - 0.5 * float(resid @ resid)

    return log_joint


def _binary_log_joint_packed(obs: BinaryObservations) -> Callable[[np.ndarray], float]:
    n_m, n_a = obs.n_models, obs.n_annotators
    i_idx = np.array([r[0] for r in obs.rows], dtype=np.intp)
    j_idx = np.array([n_m + r[1] for r in obs.rows], dtype=np.intp)
    k_idx = np.array([n_m + n_a + r[2] for r in obs.rows], dtype=np.intp)
    sign = np.array([1.0 if r[3] == 1 else -1.0 for r in obs.rows])
    dim = n_m + n_a + obs.n_turns
    const = -dim * HALF_LOG_2PI

    def log_joint(v: np.ndarray) -> float:
        eta = v[i_idx] + v[j_idx] + v[k_idx]
        loglik = -np.logaddexp(0.0, -sign * eta).sum() if len(eta) else 0.0
        return const - 0.5 * float(v @ v) + float(loglik)

    return log_joint


@dataclass(frozen=True)
class StepConfig:
    initial: float = 0.5
    adapt_window: int = 25
    target_low: float = 0.25
    target_high: float = 0.45
    shrink: float = 0.8
    grow: float = 1.25

    def __post_init__(self):
        if self.initial <= 0 or self.adapt_window < 1:
            raise InputError("invalid step config")
        if not 0 < self.target_low < self.target_high < 1:
            raise InputError("acceptance targets must satisfy 0 < low < high < 1")


@dataclass(frozen=True)
class ChainDiagnostics:
    warmup: int
    draws: int
    acceptance_rate: float
    final_step: float

    def to_json_dict(self) -> dict:
        return {
            "warmup": self.warmup,
            "draws": self.draws,
            "acceptance_rate": self.acceptance_rate,
            "final_step": self.final_step,
        }


def mcmc_sample(
    log_joint: Callable[[np.ndarray], float],
    init: np.ndarray,
    warmup: int,
    draws: int,
    step: StepConfig = StepConfig(),
    seed: int = 0,
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Random-walk Metropolis chain; returns (draws x dim) post-warmup states.

    The proposal is an isotropic Gaussian whose scale adapts in windows
    during warmup (targeting the configured acceptance band) and is frozen
    afterwards. Identical seeds give identical chains.
    """
    if warmup < 1 or draws < 1:
        raise InputError("warmup and draws must be >= 1")
    x = np.asarray(init, dtype=np.float64).copy()
    if x.ndim != 1:
        raise InputError("init state must be a flat vector")
    current = log_joint(x)
    if not math.isfinite(current):
        raise ChainInitError("log joint is not finite at the initial state")
    rng = np.random.default_rng(seed)
    scale = step.initial
    samples = np.empty((draws, x.shape[0]))
    accepted_window = 0
    accepted_total = 0
    for it in range(warmup + draws):
        proposal = x + scale * rng.standard_normal(x.shape[0])
        candidate = log_joint(proposal)
        if math.log(rng.random()) < candidate - current:
            x = proposal
            current = candidate
            accepted_window += 1
            if it >= warmup:
                accepted_total += 1
        if it < warmup:
            if (it + 1) % step.adapt_window == 0:
                rate = accepted_window / step.adapt_window
                if rate < step.target_low:
                    scale *= step.shrink
                elif rate > step.target_high:
                    scale *= step.grow
                accepted_window = 0
        else:
            samples[it - warmup] = x
    diag = ChainDiagnostics(
        warmup=warmup,
        draws=draws,
        acceptance_rate=accepted_total / draws,
        final_step=scale,
    )
    return samples, diag


@dataclass(frozen=True)
class StarSamples:
    """Posterior draws for the star model, packed as [mu | M | B]."""

    values: np.ndarray
    n_models: int
    n_annotators: int

    @property
    def m(self) -> np.ndarray:
        return self.values[:, self.n_models:2 * self.n_models]

    @property
    def b(self) -> np.ndarray:
        return self.values[:, 2 * self.n_models:]


@dataclass(frozen=True)
class BinarySamples:
    """Posterior draws for the binary model, packed as [M | B | T]."""

    values: np.ndarray
    n_models: int
    n_annotators: int
    n_turns: int

    @property
    def m(self) -> np.ndarray:
        return self.values[:, :self.n_models]


def posterior_summary_star(samples: StarSamples) -> list[tuple[float, float]]:
    """Per-model empirical (mean, variance) of the M_i draws."""
    if samples.values.shape[0] == 0:
        raise InputError("no samples")
    m = samples.m
    return [(float(np.mean(m[:, i])), float(np.var(m[:, i]))) for i in range(m.shape[1])]


def posterior_summary_binary(samples: BinarySamples) -> list[tuple[float, float]]:
    """Per-model empirical (mean, variance) of sigmoid(M_i), applied per draw."""
    if samples.values.shape[0] == 0:
        raise InputError("no samples")
    s = sigmoid(samples.m)
    return [(float(np.mean(s[:, i])), float(np.var(s[:, i]))) for i in range(s.shape[1])]


@dataclass(frozen=True)
class CalibrationResult:
    kind: str
    model_names: tuple[str, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    diagnostics: ChainDiagnostics
    seed: int
    samples: StarSamples | BinarySamples

    def __post_init__(self):
        if self.samples.values.shape[0] != self.diagnostics.draws:
            raise InputError("sample count must equal the configured draws")
        if any(v < 0 for v in self.variances):
            raise InputError("variances must be nonnegative")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "models": [
                {"name": name, "mean": mean, "variance": variance}
                for name, mean, variance in zip(self.model_names, self.means, self.variances)
            ],
            "diagnostics": self.diagnostics.to_json_dict(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def calibrate_star(
    obs: StarObservations,
    warmup: int = STAR_WARMUP,
    draws: int = STAR_DRAWS,
    seed: int = 0,
    step: StepConfig = StepConfig(),
    model_names: Sequence[str] | None = None,
) -> CalibrationResult:
    """Run the star-model chain and summarize per-model posterior M_i."""
    init = np.concatenate([
        np.full(obs.n_models, 2.5),
        np.full(obs.n_models, 2.5),
        np.zeros(obs.n_annotators),
    ])
    values, diag = mcmc_sample(
        _star_log_joint_packed(obs), init, warmup, draws, step, seed
    )
    samples = StarSamples(values, obs.n_models, obs.n_annotators)
    summary = posterior_summary_star(samples)
    names = tuple(model_names) if model_names else tuple(
        f"model-{i}" for i in range(obs.n_models)
    )
    if len(names) != obs.n_models:
        raise InputError("model_names length does not match observations")
    return CalibrationResult(
        kind="star",
        model_names=names,
        means=tuple(mean for mean, _ in summary),
        variances=tuple(var for _, var in summary),
        diagnostics=diag,
        seed=seed,
        samples=samples,
    )


def calibrate_binary(
    obs: BinaryObservations,
    warmup: int = BINARY_WARMUP,
    draws: int = BINARY_DRAWS,
    seed: int = 0,
    step: StepConfig = StepConfig(),
    model_names: Sequence[str] | None = None,
) -> CalibrationResult:
    """Run the binary-model chain; summaries are of sigmoid(M_i)."""
    init = np.zeros(obs.n_models + obs.n_annotators + obs.n_turns)
    values, diag = mcmc_sample(
        _binary_log_joint_packed(obs), init, warmup, draws, step, seed
    )
    samples = BinarySamples(values, obs.n_models, obs.n_annotators, obs.n_turns)
    summary = posterior_summary_binary(samples)
    names = tuple(model_names) if model_names else tuple(
        f"model-{i}" for i in range(obs.n_models)
    )
    if len(names) != obs.n_models:
        raise InputError("model_names length does not match observations")
    return CalibrationResult(
        kind="binary",
        model_names=names,
        means=tuple(mean for mean, _ in summary),
        variances=tuple(var for _, var in summary),
        diagnostics=diag,
        seed=seed,
        samples=samples,
    )


class _DenseIndex:
    """First-appearance string -> dense index mapping."""

    def __init__(self):
        self.names: list[str] = []
        self._ids: dict[str, int] = {}

    def __call__(self, name: str) -> int:
        if name not in self._ids:
            self._ids[name] = len(self.names)
            self.names.append(name)
        return self._ids[name]


def star_observations_from_csv(path: str | Path) -> tuple[StarObservations, list[str]]:
    """Read `model,annotator,score` rows; names map to indices by first appearance."""
    models = _DenseIndex()
    annotators = _DenseIndex()
    rows = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {
            "model", "annotator", "score",
        }:
            raise InputError("expected header: model,annotator,score")
        for lineno, row in enumerate(reader, start=2):
            try:
                score = float(row["score"])
            except (TypeError, ValueError):
                raise InputError(f"line {lineno}: bad score {row['score']!r}") from None
            rows.append((models(row["model"]), annotators(row["annotator"]), score))
    return StarObservations.from_rows(rows), models.names


def binary_observations_from_csv(path: str | Path) -> tuple[BinaryObservations, list[str]]:
    """Read `model,annotator,turn,label` rows (labels 0/1)."""
    models = _DenseIndex()
    annotators = _DenseIndex()
    rows = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {
            "model", "annotator", "turn", "label",
        }:
            raise InputError("expected header: model,annotator,turn,label")
        for lineno, row in enumerate(reader, start=2):
            try:
                turn = int(row["turn"])
                label = int(row["label"])
            except (TypeError, ValueError):
                raise InputError(f"line {lineno}: bad turn or label") from None
            rows.append((models(row["model"]), annotators(row["annotator"]), turn, label))
    return BinaryObservations.from_rows(rows), models.names


def star_observations_from_transcripts(
    records: Sequence[Mapping],
) -> tuple[StarObservations, list[str]]:
    """Overall 1-4 scores from annotated transcript records, keyed by strategy."""
    models = _DenseIndex()
    annotators = _DenseIndex()
    rows = []
    for record in records:
        annotation = record.get("annotation")
        if not annotation:
            continue
        rows.append((
            models(record["strategy"]),
            annotators(record["annotator_id"]),
            float(annotation["overall"]),
        ))
    if not rows:
        raise InputError("no annotated transcripts")
    return StarObservations.from_rows(rows), models.names


def binary_observations_from_transcripts(
    records: Sequence[Mapping],
    signal: str = "good",
) -> tuple[BinaryObservations, list[str]]:
    """Per-pair good/bad flags from annotated transcripts.

    The turn index of a flag is its pair position within the conversation,
    so turn bias is shared across conversations by position.
    """
    if signal not in ("good", "bad"):
        raise InputError("signal must be 'good' or 'bad'")
    key = f"{signal}_pairs"
    models = _DenseIndex()
    annotators = _DenseIndex()
    rows = []
    for record in records:
        annotation = record.get("annotation")
        if not annotation:
            continue
        i = models(record["strategy"])
        j = annotators(record["annotator_id"])
        for k, flag in enumerate(annotation[key]):
            rows.append((i, j, k, int(bool(flag))))
    if not rows:
        raise InputError("no annotated transcripts")
    return BinaryObservations.from_rows(rows), models.names
