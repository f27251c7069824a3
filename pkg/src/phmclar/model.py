"""Core model types, parameter validation, Gaussian emissions and simulation.

A model couples a K-state Markov chain (initial law ``pi``, transition
matrix ``A``) with one linear autoregression of order ``p`` per state and
a p-variate Gaussian law for the p values that seed the recursion.  State
labels may be observed, hidden, or restricted to a subset at every
time-step; a :class:`LabeledSequence` carries one :class:`LabelSet` per
observation to encode that.

States are 0-based everywhere inside the library.  The 1-based convention
used by the JSON file formats is applied only in :mod:`phmclar.serialize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidModel

_LOG_2PI = math.log(2.0 * math.pi)
_ATOL = 1e-9


def _frozen_array(values, dtype=float, ndim=None) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Hyper:
    """Structural hyper-parameters: number of states K and lag order p."""

    K: int
    p: int


@dataclass(frozen=True)
class PhmcParams:
    """Markov-chain parameters: initial law and row-stochastic transitions."""

    pi: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen_array(self.pi, ndim=1))
        object.__setattr__(self, "A", _frozen_array(self.A, ndim=2))


@dataclass(frozen=True)
class LarParams:
    """One state's autoregression: intercept, lag coefficients, noise sd.

    ``phi`` holds ``p + 1`` entries, the intercept first, then the
    coefficients of the most-recent to the oldest lag.  ``h`` is the
    standard deviation of the Gaussian innovation.
    """

    phi: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen_array(self.phi, ndim=1))
        object.__setattr__(self, "h", float(self.h))


@dataclass(frozen=True)
class InitialLaw:
    """Gaussian law of the p seed values: mean vector and covariance."""

    m: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen_array(self.m, ndim=1))
        object.__setattr__(self, "V", _frozen_array(self.V, ndim=2))


@dataclass(frozen=True)
class ModelParams:
    """Complete parameter set of a K-state switching autoregression."""

    hyper: Hyper
    phmc: PhmcParams
    lar: tuple[LarParams, ...]
    g0: InitialLaw

    def __post_init__(self):
        object.__setattr__(self, "lar", tuple(self.lar))


@dataclass(frozen=True)
class LabelSet:
    """Non-empty set of admissible states at one time-step (bitmask).

    A singleton means the state was observed; the full set means it is
    hidden; anything in between restricts the state without pinning it.
    """

    mask: int

    def __post_init__(self):
        object.__setattr__(self, "mask", int(self.mask))
        if self.mask <= 0:
            raise InvalidModel("label set must allow at least one state")

    @classmethod
    def single(cls, state: int) -> "LabelSet":
        """Label set for an observed state (0-based)."""
        return cls(1 << int(state))

    @classmethod
    def full(cls, K: int) -> "LabelSet":
        """Label set for a hidden state: all of 0..K-1 allowed."""
        return cls((1 << K) - 1)

    @classmethod
    def of(cls, states: Iterable[int]) -> "LabelSet":
        mask = 0
        for s in states:
            mask |= 1 << int(s)
        return cls(mask)

    def states(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.mask.bit_length()) if self.mask >> s & 1)

    def contains(self, state: int) -> bool:
        return bool(self.mask >> state & 1)

    def is_singleton(self) -> bool:
        return self.mask & (self.mask - 1) == 0

    def is_full(self, K: int) -> bool:
        return self.mask == (1 << K) - 1

    def size(self) -> int:
        return int(self.mask).bit_count()


@dataclass(frozen=True)
class LabeledSequence:
    """Observed series with p seed values and one label set per step.

    ``initial`` is ordered oldest first, so ``initial[-1]`` immediately
    precedes ``series[0]``.
    """

    initial: np.ndarray
    series: np.ndarray
    labels: tuple[LabelSet, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "initial", _frozen_array(self.initial, ndim=1))
        object.__setattr__(self, "series", _frozen_array(self.series, ndim=1))
        labels = tuple(self.labels)
        if len(labels) != len(self.series):
            raise DimensionMismatch(
                f"{len(labels)} labels for {len(self.series)} observations"
            )
        if len(self.series) < 1:
            raise DimensionMismatch("series must contain at least one value")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.series)

    @classmethod
    def hidden(cls, initial, series, K: int) -> "LabeledSequence":
        """Sequence with every state hidden."""
        full = LabelSet.full(K)
        series = np.asarray(series, dtype=float)
        return cls(initial, series, (full,) * len(series))

    @classmethod
    def observed(cls, initial, series, states: Sequence[int]) -> "LabeledSequence":
        """Fully labelled sequence: one observed state per step."""
        return cls(initial, series, tuple(LabelSet.single(int(s)) for s in states))

    def label_matrix(self, K: int) -> np.ndarray:
        """Boolean (T, K) admissibility mask built from the label sets."""
        mask = np.zeros((len(self), K), dtype=bool)
        for t, lab in enumerate(self.labels):
            for s in lab.states():
                if s >= K:
                    raise DimensionMismatch(
                        f"label at step {t} allows state {s} but K={K}"
                    )
                mask[t, s] = True
        return mask

    def observed_states(self) -> np.ndarray:
        """States of a fully labelled sequence, as an int array."""
        states = np.empty(len(self), dtype=int)
        for t, lab in enumerate(self.labels):
            if not lab.is_singleton():
                raise InvalidModel(f"label at step {t} is not a singleton")
            states[t] = lab.states()[0]
        return states


def validate_model(m: ModelParams, strict_stationarity: bool = False) -> None:
    """Check every model invariant, raising on the first violation.

    Parameters
    ----------
    m : ModelParams
        Parameter set to check.
    strict_stationarity : bool
        When true, additionally require every lag coefficient to be
        below 1 in absolute value.  Meant for generative models used in
        simulation; estimation never enforces it.

    Raises
    ------
    InvalidModel
        With a message naming the violated invariant.
    """
    K, p = m.hyper.K, m.hyper.p
    if K < 1:
        raise InvalidModel(f"K must be >= 1, got {K}")
    if p < 1:
        raise InvalidModel(f"p must be >= 1, got {p}")

    pi, A = m.phmc.pi, m.phmc.A
    if pi.shape != (K,):
        raise InvalidModel(f"pi has shape {pi.shape}, expected ({K},)")
    if np.any(pi < -_ATOL) or np.any(pi > 1 + _ATOL):
        raise InvalidModel("pi entries must lie in [0, 1]")
    if abs(float(pi.sum()) - 1.0) > _ATOL:
        raise InvalidModel(f"pi sums to {pi.sum():.12g}, expected 1")
    if A.shape != (K, K):
        raise InvalidModel(f"A has shape {A.shape}, expected ({K}, {K})")
    if np.any(A < -_ATOL) or np.any(A > 1 + _ATOL):
        raise InvalidModel("transition probabilities must lie in [0, 1]")
    rowsums = A.sum(axis=1)
    bad = np.nonzero(np.abs(rowsums - 1.0) > _ATOL)[0]
    if bad.size:
        i = int(bad[0])
        raise InvalidModel(f"row {i} of A sums to {rowsums[i]:.12g}, expected 1")

    if len(m.lar) != K:
        raise InvalidModel(f"{len(m.lar)} state regressions for K={K}")
    for k, lar in enumerate(m.lar):
        if lar.phi.shape != (p + 1,):
            raise InvalidModel(
                f"state {k}: phi has {lar.phi.size} entries, expected {p + 1}"
            )
        if not lar.h > 0:
            raise InvalidModel(f"state {k}: h must be positive, got {lar.h}")
        if strict_stationarity and np.any(np.abs(lar.phi[1:]) >= 1):
            raise InvalidModel(f"state {k}: lag coefficients must satisfy |phi| < 1")

    g0 = m.g0
    if g0.m.shape != (p,):
        raise InvalidModel(f"g0 mean has shape {g0.m.shape}, expected ({p},)")
    if g0.V.shape != (p, p):
        raise InvalidModel(f"g0 covariance has shape {g0.V.shape}, expected ({p}, {p})")
    if np.max(np.abs(g0.V - g0.V.T)) > _ATOL:
        raise InvalidModel("g0 covariance must be symmetric")
    eigvals = np.linalg.eigvalsh((g0.V + g0.V.T) / 2.0)
    if np.any(eigvals < -_ATOL):
        raise InvalidModel("g0 covariance must be positive semi-definite")


def emission_mean(lar: LarParams, lags: Sequence[float]) -> float:
    """Conditional mean of the next value given lags (most recent first)."""
    lags = np.asarray(lags, dtype=float)
    if lags.shape != (lar.phi.size - 1,):
        raise DimensionMismatch(
            f"{lags.size} lags for an order-{lar.phi.size - 1} regression"
        )
    return float(lar.phi[0] + lar.phi[1:] @ lags)


def emission_logdensity(lar: LarParams, x: float, lags: Sequence[float]) -> float:
    """Log Gaussian density of ``x`` given lags under one state's regression."""
    mu = emission_mean(lar, lags)
    z = (float(x) - mu) / lar.h
    return -math.log(lar.h) - 0.5 * _LOG_2PI - 0.5 * z * z


def lag_matrix(initial: np.ndarray, series: np.ndarray, p: int) -> np.ndarray:
    """(T, p) matrix whose row t holds the p values preceding series[t].

    Column j is the (j + 1)-th lag, matching the coefficient order of
    :class:`LarParams`.
    """
    if initial.shape != (p,):
        raise DimensionMismatch(f"{initial.size} seed values for order p={p}")
    full = np.concatenate([initial, series])
    T = len(series)
    out = np.empty((T, p))
    for j in range(1, p + 1):
        out[:, j - 1] = full[p - j : p - j + T]
    return out


def emission_matrix_for(
    lars: Sequence[LarParams], p: int, seq: LabeledSequence
) -> np.ndarray:
    """(T, K) matrix of per-step, per-state emission log densities."""
    lagm = lag_matrix(seq.initial, seq.series, p)
    x = seq.series
    cols = []
    for lar in lars:
        mu = lar.phi[0] + lagm @ lar.phi[1:]
        z = (x - mu) / lar.h
        cols.append(-math.log(lar.h) - 0.5 * _LOG_2PI - 0.5 * z * z)
    return np.column_stack(cols)


def log_emission_matrix(m: ModelParams, seq: LabeledSequence) -> np.ndarray:
    """Emission log densities of a sequence under every state of a model."""
    return emission_matrix_for(m.lar, m.hyper.p, seq)


def sample_initial(g0: InitialLaw, rng: np.random.Generator) -> np.ndarray:
    """Draw one seed vector; semi-definite covariances get a tiny ridge."""
    p = g0.m.size
    chol = np.linalg.cholesky(g0.V + 1e-12 * np.eye(p))
    return g0.m + chol @ rng.standard_normal(p)


def simulate(
    m: ModelParams, T: int, seed: int | np.random.Generator
) -> tuple[np.ndarray, LabeledSequence]:
    """Simulate a state path and its observation sequence.

    Draws the seed values from the initial law, the state path from the
    Markov chain, and each observation from the active state's
    autoregression.  The returned sequence is fully labelled with the
    simulated states.

    Parameters
    ----------
    m : ModelParams
        Generative model; must pass :func:`validate_model`.
    T : int
        Number of observations, at least 1.
    seed : int or numpy Generator
        Source of randomness.  The same integer seed always yields the
        same output.

    Returns
    -------
    states : ndarray of shape (T,)
        Simulated state indices (0-based).
    seq : LabeledSequence
        Seed values, series, and singleton labels equal to ``states``.
    """
    validate_model(m)
    if T < 1:
        raise InvalidModel(f"sequence length must be >= 1, got {T}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K, p = m.hyper.K, m.hyper.p

    initial = sample_initial(m.g0, rng)
    states = np.empty(T, dtype=int)
    states[0] = rng.choice(K, p=m.phmc.pi)
    for t in range(1, T):
        states[t] = rng.choice(K, p=m.phmc.A[states[t - 1]])

    series = np.empty(T)
    window = np.concatenate([initial, series])  # filled in as we go
    for t in range(T):
        lar = m.lar[states[t]]
        lags = window[t : p + t][::-1]
        window[p + t] = lar.phi[0] + lar.phi[1:] @ lags + lar.h * rng.standard_normal()
    series = window[p:]

    seq = LabeledSequence.observed(initial, series, states)
    return states, seq
