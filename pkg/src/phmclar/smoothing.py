"""Smoothed posteriors under partial state labels.

Three scaled passes compute the pairwise posteriors of consecutive states
given the whole series and every label constraint:

* a first backward pass propagates label feasibility (``tau``),
* a forward pass filters observation mass step by step (``alpha``) and
  collects one scaling constant per step (``C``); the log likelihood of
  the labelled sequence is the sum of their logs,
* a second backward pass folds in future evidence (``beta``).

Each pairwise slice is renormalized to sum to one after assembly, so the
per-step scaling constants of the passes only need to be positive, never
calibrated.  :func:`brute_force_posterior` provides the exact
enumeration oracle the scaled path is tested against.

All quantities are kept in the linear domain with per-step scaling,
except emission densities, which are exponentiated relative to their
per-step maximum for extra headroom.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import TooLarge, ZeroLabelMass, ZeroLikelihood
from .model import (
    LabeledSequence,
    ModelParams,
    log_emission_matrix,
    validate_model,
)

#: Path-count cap for the enumeration oracle.
BRUTE_FORCE_CAP = 10**6


@dataclass(frozen=True)
class ScaledPass:
    """Raw per-step quantities of the three scaled passes.

    ``tau``, ``alpha`` and ``beta`` are (T, K); ``C`` and ``sigma_norms``
    have length T.  ``sigma_norms[t]`` is the label-set normalizer for
    step t (for t = 0 it sums the initial law over the first label set,
    afterwards it double-sums the transition matrix over consecutive
    label sets).
    """

    tau: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    C: np.ndarray
    sigma_norms: np.ndarray


@dataclass(frozen=True)
class Posteriors:
    """Smoothed posteriors of a labelled sequence.

    ``xi`` has shape (T - 1, K, K); ``xi[t, k, l]`` is the posterior
    probability of the state pair at steps (t, t + 1).  ``gamma`` is the
    (T, K) matrix of smoothed marginals.  ``loglik`` is the log of the
    joint probability of the observations and the label constraints.
    """

    xi: np.ndarray
    gamma: np.ndarray
    loglik: float


def _label_normalizers(m: ModelParams, mask: np.ndarray) -> np.ndarray:
    """Per-step label-set normalizers; errors out when one is zero."""
    T = mask.shape[0]
    norms = np.empty(T)
    norms[0] = float(m.phmc.pi[mask[0]].sum())
    for t in range(1, T):
        norms[t] = float(m.phmc.A[np.ix_(mask[t - 1], mask[t])].sum())
    zero = np.nonzero(norms <= 0.0)[0]
    if zero.size:
        raise ZeroLabelMass(
            f"label sets at step {int(zero[0])} have zero probability under the chain"
        )
    return norms


def _shifted_emissions(
    m: ModelParams, seq: LabeledSequence, mask: np.ndarray, log_emissions=None
) -> tuple[np.ndarray, np.ndarray]:
    """Masked emission densities scaled by their per-step allowed maximum."""
    logb = log_emission_matrix(m, seq) if log_emissions is None else np.asarray(
        log_emissions, dtype=float
    )
    shifted = np.where(mask, logb, -np.inf)
    shift = shifted.max(axis=1)
    b = np.exp(shifted - shift[:, None])
    return b, shift


def backward_tau(
    m: ModelParams, seq: LabeledSequence
) -> tuple[np.ndarray, np.ndarray]:
    """First backward pass: scaled label-feasibility weights.

    Returns the (T, K) matrix of scaled weights and the per-step
    normalizers.  Row t holds, for every state, the probability of the
    remaining label sets given that state at step t, divided by the
    running product of normalizers; rows for states that the labels rule
    out are computed by the same recursion rather than zeroed.

    Raises
    ------
    ZeroLabelMass
        If some consecutive label sets have zero mass under the chain.
    """
    validate_model(m)
    K = m.hyper.K
    mask = seq.label_matrix(K)
    norms = _label_normalizers(m, mask)
    T = len(seq)
    tau = np.empty((T, K))
    tau[T - 1] = 1.0 / norms[T - 1]
    A = m.phmc.A
    for t in range(T - 2, -1, -1):
        allowed = mask[t + 1]
        tau[t] = (A[:, allowed] @ tau[t + 1, allowed]) / norms[t]
    return tau, norms


def forward_alpha(
    m: ModelParams,
    seq: LabeledSequence,
    tau_pass: tuple[np.ndarray, np.ndarray],
    log_emissions=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass: filtered state weights and per-step scaling constants.

    ``alpha[t]`` is the probability of each state given the labels and
    the observations up to t, normalized to sum to one.  ``C[t]`` is the
    joint probability increment of observation t together with its label
    event, so that ``sum(log(C))`` is the log likelihood of the labelled
    sequence.

    Raises
    ------
    ZeroLikelihood
        If some observation is impossible under every admissible state.
    """
    tau, _ = tau_pass
    K = m.hyper.K
    mask = seq.label_matrix(K)
    b, shift = _shifted_emissions(m, seq, mask, log_emissions)
    T = len(seq)
    A = m.phmc.A

    alpha = np.empty((T, K))
    ln_c = np.empty(T)
    filt = m.phmc.pi * b[0]
    for t in range(T):
        if t > 0:
            filt = b[t] * (filt @ A)
        total = float(filt.sum())
        if total <= 0.0:
            raise ZeroLikelihood(f"observation at step {t} has zero likelihood")
        filt = filt / total
        ln_c[t] = math.log(total) + shift[t]
        weighted = filt * tau[t]
        z = float(weighted.sum())
        if z <= 0.0:
            raise ZeroLikelihood(
                f"no admissible continuation carries mass at step {t}"
            )
        alpha[t] = weighted / z
    return alpha, np.exp(ln_c)


def backward_beta(
    m: ModelParams,
    seq: LabeledSequence,
    tau_pass: tuple[np.ndarray, np.ndarray],
    C: np.ndarray,
    log_emissions=None,
) -> np.ndarray:
    """Second backward pass: scaled future-evidence weights.

    The last row is ``1 / C[-1]`` for every state.  Entries whose
    feasibility weight is zero are set to zero; they carry no posterior
    mass.
    """
    tau, norms = tau_pass
    K = m.hyper.K
    mask = seq.label_matrix(K)
    logb = log_emission_matrix(m, seq) if log_emissions is None else np.asarray(
        log_emissions, dtype=float
    )
    b = np.exp(np.where(mask, logb, -np.inf))  # densities of admissible states
    T = len(seq)
    A = m.phmc.A

    beta = np.zeros((T, K))
    beta[T - 1] = 1.0 / C[T - 1]
    for t in range(T - 2, -1, -1):
        carry = beta[t + 1] * b[t + 1] * tau[t + 1]
        num = A @ carry
        denom = tau[t] * norms[t] * C[t]
        ok = tau[t] > 0.0
        beta[t, ok] = num[ok] / denom[ok]
        beta[t] *= mask[t]
    return beta


def scaled_pass(m: ModelParams, seq: LabeledSequence) -> ScaledPass:
    """Run the three scaled passes and bundle their raw outputs.

    Emission densities are computed once and shared by the passes.
    """
    tau, norms = backward_tau(m, seq)
    logb = log_emission_matrix(m, seq)
    alpha, C = forward_alpha(m, seq, (tau, norms), log_emissions=logb)
    beta = backward_beta(m, seq, (tau, norms), C, log_emissions=logb)
    return ScaledPass(tau=tau, alpha=alpha, beta=beta, C=C, sigma_norms=norms)


def smooth(
    m: ModelParams, seq: LabeledSequence, log_emissions=None
) -> Posteriors:
    """Smoothed pairwise and marginal posteriors plus the log likelihood.

    Runs the three passes with per-row rescaling (the backward passes are
    only ever used through ratios, so each row may carry an arbitrary
    positive factor), assembles every pairwise slice, renormalizes it to
    sum to one, and derives the marginals from the slices.

    Parameters
    ----------
    m : ModelParams
        Model; must pass :func:`validate_model`.
    seq : LabeledSequence
        Series with its label constraints.
    log_emissions : ndarray, optional
        (T, K) override of the emission log densities.  Extension point
        for alternate emission families; tests also use it.

    Raises
    ------
    ZeroLabelMass, ZeroLikelihood
        When the labels or the observations have zero probability.
    """
    validate_model(m)
    K = m.hyper.K
    mask = seq.label_matrix(K)
    _label_normalizers(m, mask)  # ZeroLabelMass check
    b, shift = _shifted_emissions(m, seq, mask, log_emissions)
    T = len(seq)
    A = m.phmc.A

    # Forward filter, one normalized row per step.
    filt = np.empty((T, K))
    ln_c = np.empty(T)
    row = m.phmc.pi * b[0]
    for t in range(T):
        if t > 0:
            row = b[t] * (filt[t - 1] @ A)
        total = float(row.sum())
        if total <= 0.0:
            raise ZeroLikelihood(f"observation at step {t} has zero likelihood")
        filt[t] = row / total
        ln_c[t] = math.log(total) + shift[t]
    loglik = float(ln_c.sum())

    if T == 1:
        gamma = filt.copy()
        return Posteriors(xi=np.zeros((0, K, K)), gamma=gamma, loglik=loglik)

    # Backward pass over the joint of future observations and labels,
    # rescaled per row; this is the feasibility and evidence passes folded
    # into the product the pairwise slices actually need.
    back = np.empty((T, K))
    back[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        v = A @ (back[t + 1] * b[t + 1])
        top = float(v.max())
        if top <= 0.0:
            raise ZeroLikelihood(
                f"no admissible continuation carries mass at step {t}"
            )
        back[t] = v / top

    xi = np.empty((T - 1, K, K))
    for t in range(T - 1):
        piece = filt[t][:, None] * A * (b[t + 1] * back[t + 1])[None, :]
        total = float(piece.sum())
        if total <= 0.0:
            raise ZeroLikelihood(f"posterior mass vanished between steps {t} and {t + 1}")
        xi[t] = piece / total

    gamma = np.empty((T, K))
    gamma[0] = xi[0].sum(axis=1)
    gamma[1:] = xi.sum(axis=1)
    return Posteriors(xi=xi, gamma=gamma, loglik=loglik)


def brute_force_posterior(m: ModelParams, seq: LabeledSequence) -> Posteriors:
    """Exact posteriors by enumerating every admissible state path.

    Test oracle; refuses instances with more than ``BRUTE_FORCE_CAP``
    unconstrained paths.
    """
    validate_model(m)
    K = m.hyper.K
    T = len(seq)
    if K**T > BRUTE_FORCE_CAP:
        raise TooLarge(f"{K}^{T} paths exceed the enumeration cap")
    mask = seq.label_matrix(K)
    logb = log_emission_matrix(m, seq)
    with np.errstate(divide="ignore"):
        log_pi = np.log(m.phmc.pi)
        log_a = np.log(m.phmc.A)

    allowed = [lab.states() for lab in seq.labels]
    paths = np.array(list(itertools.product(*allowed)), dtype=int).reshape(-1, T)
    score = log_pi[paths[:, 0]] + logb[0, paths[:, 0]]
    for t in range(1, T):
        score = score + log_a[paths[:, t - 1], paths[:, t]] + logb[t, paths[:, t]]

    top = float(score.max())
    if top == -np.inf:
        raise ZeroLikelihood("every admissible path has zero probability")
    weights = np.exp(score - top)
    total = float(weights.sum())
    loglik = top + math.log(total)
    weights /= total

    xi = np.zeros((T - 1, K, K))
    for t in range(T - 1):
        np.add.at(xi[t], (paths[:, t], paths[:, t + 1]), weights)
    gamma = np.zeros((T, K))
    for t in range(T):
        np.add.at(gamma[t], paths[:, t], weights)
    return Posteriors(xi=xi, gamma=gamma, loglik=loglik)
