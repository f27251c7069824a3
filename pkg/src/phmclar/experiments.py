"""Desk-scale experiment harness: masking, label noise, metrics, runners.

Two runners mirror the classic synthetic studies for this model family:
one sweeps the share of labelled observations (or a labelling error
rate) and scores hidden-state recovery on a test set, the other trains
on sequence prefixes and scores multi-horizon forecasts with future
states either known or hidden.  Both emit one CSV of metrics and are
deterministic given the config seed.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .decode import viterbi
from .em import EmConfig, train
from .errors import InvalidConfig, NumericFailure, ShapeMismatch
from .forecast import forecast
from .model import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    PhmcParams,
    simulate,
)
from .serialize import load_model

logger = logging.getLogger(__name__)

# Stream tags so every random draw has its own derived seed.
_TEST, _TRAIN, _MASK, _TESTMASK, _NOISE = range(5)


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


def benchmark_generator() -> ModelParams:
    """4-state order-2 generator used by the bundled experiment configs."""
    A = np.array(
        [
            [0.5, 0.2, 0.1, 0.2],
            [0.2, 0.5, 0.2, 0.1],
            [0.1, 0.2, 0.5, 0.2],
            [0.2, 0.1, 0.2, 0.5],
        ]
    )
    pi = np.full(4, 0.25)
    lar = (
        LarParams(phi=[2.0, 0.5, 0.75], h=0.2),
        LarParams(phi=[-2.0, -0.5, 0.75], h=0.5),
        LarParams(phi=[4.0, 0.5, -0.75], h=0.7),
        LarParams(phi=[-4.0, -0.5, -0.75], h=0.9),
    )
    g0 = InitialLaw(m=[3.0, 5.0], V=[[1.0, 0.1], [0.1, 1.0]])
    return ModelParams(hyper=Hyper(K=4, p=2), phmc=PhmcParams(pi=pi, A=A), lar=lar, g0=g0)


@dataclass(frozen=True)
class NoiseSpec:
    """Labelling-error model: per-step error probabilities from a Beta law.

    ``rho`` is the mean error probability; ``sd`` its spread, clamped to
    95% of the largest feasible Beta standard deviation when needed.
    """

    rho: float
    sd: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InvalidConfig(f"rho must lie in [0, 1), got {self.rho}")
        if self.sd <= 0.0:
            raise InvalidConfig(f"sd must be positive, got {self.sd}")

    def effective_sd(self) -> float:
        """Spread actually used; logs when the requested one is infeasible."""
        if self.rho == 0.0:
            return self.sd
        bound = 0.95 * math.sqrt(self.rho * (1.0 - self.rho))
        if self.sd > bound:
            logger.info(
                "noise sd %.3g infeasible for rho=%.3g, clamped to %.3g",
                self.sd,
                self.rho,
                bound,
            )
            return bound
        return self.sd


def mask_labels(
    seq: LabeledSequence, P: float, seed: int, K: int | None = None
) -> LabeledSequence:
    """Keep a P% share of labels observed, hide the rest.

    Exactly ``round(P * T / 100)`` uniformly chosen positions stay
    singletons (round half up); all others become the full state set.
    For a fixed seed the kept positions are nested across increasing P.
    ``K`` defaults to the largest state the labels mention.
    """
    if not 0.0 <= P <= 100.0:
        raise InvalidConfig(f"P must lie in [0, 100], got {P}")
    seq.observed_states()  # requires fully labelled input
    if K is None:
        K = max(lab.mask.bit_length() for lab in seq.labels)
    T = len(seq)
    keep_count = math.floor(P * T / 100.0 + 0.5)
    order = _rng(seed).permutation(T)
    keep = set(order[:keep_count].tolist())
    labels = tuple(
        seq.labels[t] if t in keep else LabelSet.full(K) for t in range(T)
    )
    return LabeledSequence(seq.initial, seq.series, labels)


def corrupt_labels(
    seq: LabeledSequence, noise: NoiseSpec, K: int | None = None
) -> LabeledSequence:
    """Replace labels with wrong ones at Beta-distributed per-step rates.

    Every label stays a singleton; a corrupted step gets a state drawn
    uniformly from the others.  With ``rho = 0`` the sequence is
    returned unchanged.
    """
    states = seq.observed_states()
    if K is None:
        K = max(lab.mask.bit_length() for lab in seq.labels)
    if noise.rho == 0.0:
        return seq
    rng = _rng(noise.seed)
    sd = noise.effective_sd()
    var = sd * sd
    common = noise.rho * (1.0 - noise.rho) / var - 1.0
    a, b = noise.rho * common, (1.0 - noise.rho) * common
    T = len(seq)
    p_t = rng.beta(a, b, size=T)
    hit = rng.random(T) < p_t
    offsets = rng.integers(0, K - 1, size=T)
    corrupted = states.copy()
    wrong = np.where(offsets < states, offsets, offsets + 1)
    corrupted[hit] = wrong[hit]
    return LabeledSequence.observed(seq.initial, seq.series, corrupted)


def mpe(truth: Sequence[np.ndarray], pred: Sequence[np.ndarray]) -> float:
    """Mean over sequences of the per-step state mismatch fraction."""
    if len(truth) != len(pred):
        raise ShapeMismatch(f"{len(truth)} truth sequences vs {len(pred)} predictions")
    if len(truth) == 0:
        raise ShapeMismatch("no sequences to score")
    parts = []
    for i, (a, b) in enumerate(zip(truth, pred)):
        a, b = np.asarray(a), np.asarray(b)
        if a.shape != b.shape:
            raise ShapeMismatch(f"sequence {i}: shapes {a.shape} vs {b.shape}")
        parts.append(float(np.mean(a != b)))
    return float(np.mean(parts))


def rmse_at_h(truths: Sequence[float], preds: Sequence[float]) -> float:
    """Root mean squared error across replicates at one horizon."""
    a, b = np.asarray(truths, dtype=float), np.asarray(preds, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ShapeMismatch(f"shapes {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class InferenceExperimentConfig:
    """Sweep labelled-share P, error rate rho, or test-label share Q."""

    generator: ModelParams
    sweep_variable: str = "P"  # "P", "rho", or "Q"
    sweep_values: tuple[float, ...] = (0.0, 50.0, 100.0)
    train_n: int = 10
    train_t: int = 100
    test_count: int = 20
    test_length: int = 200
    test_q: float = 0.0
    train_p: float = 100.0  # labelled share during training for Q sweeps
    noise_sd: float = 0.2
    replicates: int = 5
    seed: int = 0
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.sweep_variable not in ("P", "rho", "Q"):
            raise InvalidConfig(f"unknown sweep variable {self.sweep_variable!r}")
        if self.replicates < 1 or self.train_n < 1 or self.test_count < 1:
            raise InvalidConfig("counts must be >= 1")


@dataclass(frozen=True)
class ForecastExperimentConfig:
    """Train on prefixes, forecast 1..H with states known and hidden."""

    generator: ModelParams
    sweep_variable: str = "P"  # "P" or "rho"
    sweep_values: tuple[float, ...] = (100.0,)
    train_t: int = 100
    horizons: int = 10
    noise_sd: float = 0.2
    replicates: int = 5
    seed: int = 0
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.horizons < 1:
            raise InvalidConfig(f"horizons must be >= 1, got {self.horizons}")
        if self.sweep_variable not in ("P", "rho"):
            raise InvalidConfig(f"unknown sweep variable {self.sweep_variable!r}")
        if self.replicates < 1:
            raise InvalidConfig("replicates must be >= 1")


INFERENCE_FIELDS = [
    "sweep_variable",
    "sweep_value",
    "replicate",
    "mpe",
    "em_iterations",
    "train_loglik",
    "status",
]
FORECAST_FIELDS = ["sweep_variable", "sweep_value", "states", "h", "rmse", "replicates"]


def _apply_training_labels(seq, variable, value, noise_sd, seed, K):
    if variable == "rho":
        return corrupt_labels(seq, NoiseSpec(rho=float(value), sd=noise_sd, seed=seed), K)
    return mask_labels(seq, value, seed, K)


def run_inference_experiment(cfg: InferenceExperimentConfig) -> list[dict]:
    """Train across the sweep, decode the test set, score state recovery.

    Returns one row per (sweep value, replicate) with the mean
    percentage error of the decoded test states, the iteration count and
    final log likelihood of training, and a status column recording
    failures.  Replicates reuse one precursor corpus and differ by where
    labels are kept or corrupted, mirroring the usual protocol.
    """
    gen = cfg.generator
    hyper = gen.hyper

    test_truth, test_seqs = [], []
    for j in range(cfg.test_count):
        states, seq = simulate(gen, cfg.test_length, _rng(cfg.seed, _TEST, j))
        test_truth.append(states)
        test_seqs.append(seq)

    precursor = [
        simulate(gen, cfg.train_t, _rng(cfg.seed, _TRAIN, i))[1]
        for i in range(cfg.train_n)
    ]

    def train_once(value, rep):
        data = [
            _apply_training_labels(
                precursor[i],
                "rho" if cfg.sweep_variable == "rho" else "P",
                value,
                cfg.noise_sd,
                int(_rng(cfg.seed, _MASK, rep, i).integers(2**31)),
                hyper.K,
            )
            for i in range(cfg.train_n)
        ]
        return train(data, hyper, cfg.em)

    def test_labels(q, rep):
        return [
            mask_labels(
                seq, q, int(_rng(cfg.seed, _TESTMASK, rep, j).integers(2**31)), hyper.K
            )
            for j, seq in enumerate(test_seqs)
        ]

    def score(model, q, rep):
        decoded = [viterbi(model, s).states for s in test_labels(q, rep)]
        return mpe(test_truth, decoded)

    rows: list[dict] = []
    if cfg.sweep_variable == "Q":
        for rep in range(cfg.replicates):
            try:
                report = train_once(cfg.train_p, rep)
            except NumericFailure as exc:
                for value in cfg.sweep_values:
                    rows.append(_fail_row(cfg, value, rep, exc))
                continue
            for value in cfg.sweep_values:
                try:
                    error = score(report.model, value, rep)
                except NumericFailure as exc:
                    rows.append(_fail_row(cfg, value, rep, exc))
                    continue
                rows.append(_ok_row(cfg, value, rep, error, report))
    else:
        for value in cfg.sweep_values:
            for rep in range(cfg.replicates):
                try:
                    report = train_once(value, rep)
                    error = score(report.model, cfg.test_q, rep)
                except NumericFailure as exc:
                    rows.append(_fail_row(cfg, value, rep, exc))
                    continue
                rows.append(_ok_row(cfg, value, rep, error, report))
    return rows


def _ok_row(cfg, value, rep, error, report) -> dict:
    return {
        "sweep_variable": cfg.sweep_variable,
        "sweep_value": value,
        "replicate": rep,
        "mpe": error,
        "em_iterations": report.iterations,
        "train_loglik": report.loglik_trace[-1],
        "status": "ok",
    }


def _fail_row(cfg, value, rep, exc) -> dict:
    return {
        "sweep_variable": cfg.sweep_variable,
        "sweep_value": value,
        "replicate": rep,
        "mpe": "",
        "em_iterations": "",
        "train_loglik": "",
        "status": type(exc).__name__,
    }


def run_forecast_experiment(cfg: ForecastExperimentConfig) -> list[dict]:
    """Prefix-train per replicate, forecast every horizon both ways.

    Each replicate simulates one sequence of length ``train_t +
    horizons``, trains on the labelled prefix, and predicts the suffix
    twice: with future states hidden and with the simulated states
    supplied.  Rows aggregate the root mean squared error across
    replicates, one per (sweep value, mode, horizon).
    """
    gen = cfg.generator
    hyper = gen.hyper
    T, H = cfg.train_t, cfg.horizons

    sims = [simulate(gen, T + H, _rng(cfg.seed, _TEST, rep)) for rep in range(cfg.replicates)]

    rows: list[dict] = []
    for value in cfg.sweep_values:
        collected = {
            mode: [[] for _ in range(H)] for mode in ("hidden", "known")
        }
        truths = {mode: [[] for _ in range(H)] for mode in ("hidden", "known")}
        for rep, (states, seq) in enumerate(sims):
            prefix = LabeledSequence(
                seq.initial, seq.series[:T], seq.labels[:T]
            )
            train_seq = _apply_training_labels(
                prefix,
                cfg.sweep_variable,
                value,
                cfg.noise_sd,
                int(_rng(cfg.seed, _MASK, rep).integers(2**31)),
                hyper.K,
            )
            try:
                report = train([train_seq], hyper, cfg.em)
            except NumericFailure as exc:
                logger.warning("replicate %d at %s=%s failed: %s", rep, cfg.sweep_variable, value, exc)
                continue
            futures = {
                "hidden": None,
                "known": [LabelSet.single(int(states[T + h])) for h in range(H)],
            }
            for mode, labels in futures.items():
                result = forecast(report.model, train_seq, H, labels)
                for h in range(H):
                    collected[mode][h].append(float(result.predictions[h]))
                    truths[mode][h].append(float(seq.series[T + h]))
        for mode in ("hidden", "known"):
            for h in range(H):
                used = len(collected[mode][h])
                if used == 0:
                    continue
                rows.append(
                    {
                        "sweep_variable": cfg.sweep_variable,
                        "sweep_value": value,
                        "states": mode,
                        "h": h + 1,
                        "rmse": rmse_at_h(truths[mode][h], collected[mode][h]),
                        "replicates": used,
                    }
                )
    return rows


def write_csv(rows: list[dict], path: str | Path, fieldnames: list[str]) -> Path:
    """Write metric rows with a fixed header; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return path


def _em_config_from_dict(d: dict) -> EmConfig:
    return EmConfig(
        kappa=float(d.get("kappa", 1e-6)),
        max_iter=int(d.get("max_iter", 500)),
        restarts=int(d.get("restarts", 5)),
        restart_iters=int(d.get("restart_iters", 10)),
        seed=int(d.get("seed", 0)),
    )


def load_experiment_config(path: str | Path):
    """Read an experiment config JSON; model paths resolve relative to it.

    The ``kind`` key selects the experiment; ``"model"`` may name a JSON
    file or be omitted to use the bundled benchmark generator.
    """
    path = Path(path)
    d = json.loads(path.read_text())
    kind = d.get("kind")
    if kind not in ("inference", "forecast"):
        raise InvalidConfig(f"config kind must be 'inference' or 'forecast', got {kind!r}")
    if "model" in d and d["model"] is not None:
        model_path = Path(d["model"])
        if not model_path.is_absolute():
            model_path = path.parent / model_path
        generator = load_model(model_path)
    else:
        generator = benchmark_generator()
    em_cfg = _em_config_from_dict(d.get("em", {}))
    sweep = d.get("sweep", {})
    common = {
        "generator": generator,
        "sweep_variable": sweep.get("variable", "P"),
        "sweep_values": tuple(float(v) for v in sweep.get("values", [0.0, 50.0, 100.0])),
        "replicates": int(d.get("replicates", 5)),
        "seed": int(d.get("seed", 0)),
        "em": em_cfg,
        "noise_sd": float(d.get("noise_sd", 0.2)),
    }
    if kind == "inference":
        train_d, test_d = d.get("train", {}), d.get("test", {})
        return InferenceExperimentConfig(
            train_n=int(train_d.get("N", 10)),
            train_t=int(train_d.get("T", 100)),
            train_p=float(train_d.get("P", 100.0)),
            test_count=int(test_d.get("count", 20)),
            test_length=int(test_d.get("length", 200)),
            test_q=float(test_d.get("Q", 0.0)),
            **common,
        )
    return ForecastExperimentConfig(
        train_t=int(d.get("train", {}).get("T", 100)),
        horizons=int(d.get("horizons", 10)),
        **common,
    )
