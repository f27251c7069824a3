"""Shared fixtures and random-instance helpers."""

from __future__ import annotations

import numpy as np
import pytest

from phmclar import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    PhmcParams,
    benchmark_generator,
    simulate,
)


@pytest.fixture(scope="session")
def generator4() -> ModelParams:
    """The 4-state order-2 benchmark generator."""
    return benchmark_generator()


def random_model(K: int, p: int, rng: np.random.Generator) -> ModelParams:
    pi = rng.dirichlet(np.ones(K))
    A = rng.dirichlet(np.ones(K), size=K)
    lar = tuple(
        LarParams(phi=rng.uniform(-1.0, 1.0, p + 1), h=rng.uniform(0.3, 1.5))
        for _ in range(K)
    )
    root = rng.standard_normal((p, p))
    g0 = InitialLaw(m=rng.standard_normal(p), V=root @ root.T + 0.2 * np.eye(p))
    return ModelParams(hyper=Hyper(K, p), phmc=PhmcParams(pi, A), lar=lar, g0=g0)


def random_labels(K: int, T: int, rng: np.random.Generator) -> tuple[LabelSet, ...]:
    """Mix of hidden, observed, and genuinely partial label sets."""
    labels = []
    for _ in range(T):
        u = rng.random()
        if u < 0.4:
            labels.append(LabelSet.full(K))
        elif u < 0.8:
            labels.append(LabelSet.single(int(rng.integers(K))))
        else:
            size = int(rng.integers(1, K + 1))
            labels.append(LabelSet.of(rng.choice(K, size=size, replace=False)))
    return tuple(labels)


def random_instance(
    rng: np.random.Generator, kmax: int = 3, tmax: int = 8, pmax: int = 2
) -> tuple[ModelParams, LabeledSequence]:
    """Random small model plus a sequence with a random label pattern."""
    K = int(rng.integers(1, kmax + 1))
    p = int(rng.integers(1, pmax + 1))
    T = int(rng.integers(1, tmax + 1))
    m = random_model(K, p, rng)
    _, seq = simulate(m, T, int(rng.integers(2**31)))
    seq = LabeledSequence(seq.initial, seq.series, random_labels(K, T, rng))
    return m, seq
