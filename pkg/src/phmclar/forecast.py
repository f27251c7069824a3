"""Multi-horizon point forecasting, with or without known future states.

The forecast at each horizon is the mixture of the per-state conditional
means, weighted by predictive state probabilities.  Those weights start
from the smoothed distribution of the final training state and are pushed
through the transition matrix at hidden horizons; an observed future
state pins its row.  Beyond one step ahead, earlier predictions feed the
lag window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidConfig
from .model import LabeledSequence, LabelSet, ModelParams
from .smoothing import smooth


@dataclass(frozen=True)
class ForecastResult:
    """Point predictions and predictive state weights, one row per horizon."""

    predictions: np.ndarray
    state_weights: np.ndarray


def predictive_state_weights(
    m: ModelParams,
    gamma_T: np.ndarray,
    future_labels: Sequence[LabelSet],
) -> np.ndarray:
    """Predictive state probabilities at horizons 1..H.

    Starts from ``gamma_T`` (the smoothed distribution of the last
    training state), multiplies by the transposed transition matrix for
    each hidden horizon, and replaces a labelled horizon's row by the
    distribution conditioned on its label set; a singleton label gives a
    one-hot row regardless of the propagated mass.
    """
    K = m.hyper.K
    gamma_T = np.asarray(gamma_T, dtype=float)
    rows = np.empty((len(future_labels), K))
    w = gamma_T
    for i, lab in enumerate(future_labels):
        w = m.phmc.A.T @ w
        if not lab.is_full(K):
            sel = np.zeros(K, dtype=bool)
            for s in lab.states():
                sel[s] = True
            w = np.where(sel, w, 0.0)
            total = w.sum()
            if total > 0.0:
                w = w / total
            else:
                w = sel / sel.sum()
        rows[i] = w
    return rows


def forecast(
    m: ModelParams,
    seq: LabeledSequence,
    H: int,
    future_labels: Sequence[LabelSet] | None = None,
) -> ForecastResult:
    """Point forecasts for horizons 1..H after the end of ``seq``.

    Parameters
    ----------
    m : ModelParams
        Trained model.
    seq : LabeledSequence
        History to condition on; smoothed to obtain the distribution of
        its final state.
    H : int
        Number of horizons, at least 1.
    future_labels : sequence of LabelSet, optional
        Admissible states at each horizon; defaults to fully hidden.

    Returns
    -------
    ForecastResult
        ``predictions[h-1]`` is the forecast at horizon h;
        ``state_weights[h-1]`` the weights it averaged over.
    """
    if H < 1:
        raise InvalidConfig(f"horizon must be >= 1, got {H}")
    K, p = m.hyper.K, m.hyper.p
    if future_labels is None:
        future_labels = [LabelSet.full(K)] * H
    future_labels = list(future_labels)
    if len(future_labels) != H:
        raise InvalidConfig(f"{len(future_labels)} future labels for horizon {H}")

    post = smooth(m, seq)
    weights = predictive_state_weights(m, post.gamma[-1], future_labels)

    history = np.concatenate([seq.initial, seq.series, np.empty(H)])
    base = len(seq.initial) + len(seq.series)
    phis = np.stack([lar.phi for lar in m.lar])  # (K, p + 1)
    predictions = np.empty(H)
    for h in range(H):
        lags = history[base + h - p : base + h][::-1]
        cond_means = phis[:, 0] + phis[:, 1:] @ lags
        predictions[h] = weights[h] @ cond_means
        history[base + h] = predictions[h]
    return ForecastResult(predictions=predictions, state_weights=weights)
