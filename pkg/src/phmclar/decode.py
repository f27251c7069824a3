"""Most-probable state path under partial label constraints.

A dynamic program over log joint probabilities, with transitions into
states that a label set rules out assigned probability zero.  When an
observed state pins a step, every returned path passes through it.
Ties are broken deterministically: backtracking from the end always
prefers the smallest state index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NoAdmissiblePath, TooLarge
from .model import LabeledSequence, ModelParams, log_emission_matrix, validate_model
from .smoothing import BRUTE_FORCE_CAP


@dataclass(frozen=True)
class DecodedPath:
    """A state path (0-based) and the log of its joint probability."""

    states: np.ndarray
    log_joint: float


def viterbi(m: ModelParams, seq: LabeledSequence) -> DecodedPath:
    """Most probable admissible state path.

    Parameters
    ----------
    m : ModelParams
        Model; must pass :func:`validate_model`.
    seq : LabeledSequence
        Series with label constraints; observed states are forced.

    Raises
    ------
    NoAdmissiblePath
        If every admissible path has zero probability.
    """
    validate_model(m)
    K = m.hyper.K
    T = len(seq)
    mask = seq.label_matrix(K)
    logb = log_emission_matrix(m, seq)
    with np.errstate(divide="ignore"):
        log_pi = np.log(m.phmc.pi)
        log_a = np.log(m.phmc.A)

    delta = np.full((T, K), -np.inf)
    delta[0, mask[0]] = log_pi[mask[0]] + logb[0, mask[0]]
    for t in range(1, T):
        cand = delta[t - 1][:, None] + log_a
        best = cand.max(axis=0)
        delta[t, mask[t]] = best[mask[t]] + logb[t, mask[t]]

    log_joint = float(delta[T - 1].max())
    if log_joint == -np.inf:
        raise NoAdmissiblePath("every admissible path has zero probability")

    states = np.empty(T, dtype=int)
    states[T - 1] = int(np.argmax(delta[T - 1]))
    for t in range(T - 2, -1, -1):
        states[t] = int(np.argmax(delta[t] + log_a[:, states[t + 1]]))
    return DecodedPath(states=states, log_joint=log_joint)


def brute_force_decode(m: ModelParams, seq: LabeledSequence) -> DecodedPath:
    """Exact argmax over all admissible paths; test oracle only.

    Applies the same tie-breaking rule as :func:`viterbi`: among paths of
    equal probability, the one whose states are smallest when compared
    from the final step backwards wins.
    """
    validate_model(m)
    K = m.hyper.K
    T = len(seq)
    if K**T > BRUTE_FORCE_CAP:
        raise TooLarge(f"{K}^{T} paths exceed the enumeration cap")
    logb = log_emission_matrix(m, seq)
    with np.errstate(divide="ignore"):
        log_pi = np.log(m.phmc.pi)
        log_a = np.log(m.phmc.A)

    allowed = [lab.states() for lab in seq.labels]
    paths = np.array(list(itertools.product(*allowed)), dtype=int).reshape(-1, T)
    score = log_pi[paths[:, 0]] + logb[0, paths[:, 0]]
    for t in range(1, T):
        score = score + log_a[paths[:, t - 1], paths[:, t]] + logb[t, paths[:, t]]

    best = float(score.max())
    if best == -np.inf:
        raise NoAdmissiblePath("every admissible path has zero probability")
    contenders = paths[score == best]
    order = np.lexsort(contenders.T)  # last column is the primary key
    winner = contenders[order[0]]
    return DecodedPath(states=winner.copy(), log_joint=best)
