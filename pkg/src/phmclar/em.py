"""Parameter estimation via expectation-maximization.

The chain parameters have a closed-form update from the smoothed
posteriors; each state's regression is a weighted least-squares problem
whose exact solution is used directly, with an iterative optimizer kept
as an independent cross-check.  The Gaussian law of the seed values
factors out of the iteration and is fitted once up front.

Training proper is a two-stage protocol: a multi-restart search runs a
few EM iterations from random draws and keeps the best-scoring
parameters, which then seed the full run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (
    AllSequencesZeroLikelihood,
    EmptyInput,
    InitFailed,
    InvalidConfig,
    NumericFailure,
    SingularDesignWarning,
    StarvedStateWarning,
)
from .model import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LarParams,
    ModelParams,
    PhmcParams,
    emission_matrix_for,
    lag_matrix,
)
from .smoothing import Posteriors, smooth

_LOG_2PI = math.log(2.0 * math.pi)
_RIDGE = 1e-8
_MIN_H = 1e-12


@dataclass(frozen=True)
class EmConfig:
    """Knobs of the EM loop and its multi-restart initialization."""

    kappa: float = 1e-6
    max_iter: int = 500
    restarts: int = 5
    restart_iters: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidConfig(f"kappa must be positive, got {self.kappa}")
        if self.max_iter < 1 or self.restart_iters < 1 or self.restarts < 1:
            raise InvalidConfig("iteration and restart counts must be >= 1")
        if self.max_iter < self.restart_iters:
            raise InvalidConfig("max_iter must be at least restart_iters")


@dataclass(frozen=True)
class FitReport:
    """Outcome of one EM run: final model, likelihood trace, stop reason."""

    model: ModelParams
    loglik_trace: list[float]
    iterations: int
    converged: bool


def fit_g0(initials: Sequence[np.ndarray]) -> InitialLaw:
    """Gaussian MLE of the seed-value law: mean and 1/N covariance."""
    if len(initials) == 0:
        raise EmptyInput("at least one seed vector is required")
    X = np.asarray(initials, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / X.shape[0]
    return InitialLaw(m=mean, V=cov)


def m_step_s(posteriors: Sequence[Posteriors]) -> PhmcParams:
    """Closed-form chain update from smoothed posteriors.

    Transition numerators sum the pairwise posteriors over every step of
    every sequence; the denominator sums the marginals over all steps
    including the final one, so rows are renormalized afterwards.  A row
    with no mass is replaced by the uniform distribution and flagged with
    :class:`StarvedStateWarning`.
    """
    K = posteriors[0].gamma.shape[1]
    num = np.zeros((K, K))
    den = np.zeros(K)
    pi = np.zeros(K)
    for post in posteriors:
        num += post.xi.sum(axis=0)
        den += post.gamma.sum(axis=0)
        pi += post.gamma[0]
    pi /= len(posteriors)

    A = np.empty((K, K))
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = num / den[:, None]
    for k in range(K):
        if den[k] <= 0.0 or not np.isfinite(raw[k]).all() or raw[k].sum() <= 0.0:
            warnings.warn(
                f"state {k} received no posterior mass; using a uniform row",
                StarvedStateWarning,
            )
            A[k] = 1.0 / K
        else:
            A[k] = raw[k] / raw[k].sum()
    return PhmcParams(pi=pi, A=A)


def q_x(
    theta_x: Sequence[LarParams],
    data: Sequence[LabeledSequence],
    gammas: Sequence[np.ndarray],
) -> float:
    """Posterior-weighted emission log likelihood of the whole corpus."""
    p = theta_x[0].phi.size - 1
    total = 0.0
    for seq, gamma in zip(data, gammas):
        logb = emission_matrix_for(theta_x, p, seq)
        total += float((np.asarray(gamma) * logb).sum())
    return total


def _design(seq: LabeledSequence, p: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.column_stack([np.ones(len(seq)), lag_matrix(seq.initial, seq.series, p)])
    return X, seq.series


def m_step_x(
    data: Sequence[LabeledSequence],
    gammas: Sequence[np.ndarray],
    prev: Sequence[LarParams] | None = None,
) -> tuple[LarParams, ...]:
    """Exact per-state regression update from posterior weights.

    Solves the weighted normal equations for each state's coefficients
    and sets the noise variance to the weighted mean squared residual.
    Singular systems get a small ridge and a
    :class:`SingularDesignWarning`; a state with no weight at all keeps
    its previous parameters.
    """
    K = np.asarray(gammas[0]).shape[1]
    p = len(data[0].initial)
    designs = [_design(seq, p) for seq in data]
    X = np.vstack([d[0] for d in designs])
    y = np.concatenate([d[1] for d in designs])
    W = np.vstack([np.asarray(g) for g in gammas])  # (total_T, K)

    out = []
    for k in range(K):
        w = W[:, k]
        wsum = float(w.sum())
        if wsum <= 0.0:
            warnings.warn(
                f"state {k} has zero weight; keeping previous regression",
                StarvedStateWarning,
            )
            if prev is None:
                out.append(LarParams(phi=np.zeros(p + 1), h=float(y.std() or 1.0)))
            else:
                out.append(prev[k])
            continue
        Xw = X * w[:, None]
        normal = X.T @ Xw
        rhs = Xw.T @ y
        cond = np.linalg.cond(normal)
        if not np.isfinite(cond) or cond > 1e12:
            warnings.warn(
                f"state {k}: singular weighted design, adding ridge {_RIDGE}",
                SingularDesignWarning,
            )
            normal = normal + _RIDGE * np.eye(p + 1)
        phi = np.linalg.solve(normal, rhs)
        resid = y - X @ phi
        h2 = float(w @ (resid * resid) / wsum)
        out.append(LarParams(phi=phi, h=max(math.sqrt(max(h2, 0.0)), _MIN_H)))
    return tuple(out)


def m_step_x_numeric(
    data: Sequence[LabeledSequence],
    gammas: Sequence[np.ndarray],
    init: Sequence[LarParams],
) -> tuple[LarParams, ...]:
    """Iterative cross-check of :func:`m_step_x`.

    Maximizes each state's weighted log likelihood over the coefficients
    and the log of the noise scale with a quasi-Newton method, starting
    from ``init``.  Must agree with the closed form in objective value;
    kept as an independent path, not used by the EM loop.
    """
    K = np.asarray(gammas[0]).shape[1]
    p = len(data[0].initial)
    designs = [_design(seq, p) for seq in data]
    X = np.vstack([d[0] for d in designs])
    y = np.concatenate([d[1] for d in designs])
    W = np.vstack([np.asarray(g) for g in gammas])

    out = []
    for k in range(K):
        w = W[:, k]

        def neg_obj(params):
            phi, log_h = params[:-1], params[-1]
            resid = y - X @ phi
            inv_var = math.exp(-2.0 * log_h)
            val = float(
                (w * (-log_h - 0.5 * _LOG_2PI - 0.5 * inv_var * resid * resid)).sum()
            )
            grad_phi = inv_var * (X.T @ (w * resid))
            grad_logh = float((w * (inv_var * resid * resid - 1.0)).sum())
            return -val, -np.append(grad_phi, grad_logh)

        x0 = np.append(init[k].phi, math.log(init[k].h))
        res = minimize(
            neg_obj,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 1000, "ftol": 1e-14, "gtol": 1e-10},
        )
        phi = res.x[:-1]
        out.append(LarParams(phi=phi, h=max(math.exp(res.x[-1]), _MIN_H)))
    return tuple(out)


def _param_delta(a: ModelParams, b: ModelParams) -> float:
    """Largest absolute componentwise change between parameter sets."""
    parts = [
        np.abs(a.phmc.pi - b.phmc.pi).max(),
        np.abs(a.phmc.A - b.phmc.A).max(),
    ]
    for la, lb in zip(a.lar, b.lar):
        parts.append(np.abs(la.phi - lb.phi).max())
        parts.append(abs(la.h - lb.h))
    return float(max(parts))


def _smooth_all(
    params: ModelParams, data: Sequence[LabeledSequence]
) -> list[Posteriors]:
    posts: list[Posteriors] = []
    failures: list[NumericFailure] = []
    for seq in data:
        try:
            posts.append(smooth(params, seq))
        except NumericFailure as exc:
            failures.append(exc)
    if failures:
        if len(failures) == len(data):
            raise AllSequencesZeroLikelihood(
                "every training sequence has zero likelihood"
            ) from failures[0]
        raise failures[0]
    return posts


def em_fit(
    data: Sequence[LabeledSequence],
    hyper: Hyper,
    init: ModelParams,
    cfg: EmConfig,
    max_iter: int | None = None,
) -> FitReport:
    """Run EM from a given starting point until the parameters settle.

    Fits the seed-value law once, then alternates smoothing with the
    closed-form chain and regression updates until the largest parameter
    change drops below ``cfg.kappa`` or the iteration cap is reached.
    The likelihood trace holds the corpus log likelihood measured at each
    expectation step and never decreases.
    """
    if len(data) == 0:
        raise EmptyInput("no training sequences")
    cap = cfg.max_iter if max_iter is None else max_iter
    g0 = fit_g0([seq.initial for seq in data])
    params = replace(init, g0=g0)

    trace: list[float] = []
    iterations = 0
    converged = False
    for _ in range(cap):
        iterations += 1
        posts = _smooth_all(params, data)
        trace.append(float(sum(p.loglik for p in posts)))
        phmc = m_step_s(posts)
        lar = m_step_x(data, [p.gamma for p in posts], prev=params.lar)
        new_params = ModelParams(hyper=hyper, phmc=phmc, lar=lar, g0=g0)
        delta = _param_delta(params, new_params)
        params = new_params
        if delta < cfg.kappa:
            converged = True
            break
    return FitReport(
        model=params, loglik_trace=trace, iterations=iterations, converged=converged
    )


def _random_start(
    hyper: Hyper, pooled_sd: float, g0: InitialLaw, rng: np.random.Generator
) -> ModelParams:
    K, p = hyper.K, hyper.p
    pi = rng.dirichlet(np.ones(K))
    A = rng.dirichlet(np.ones(K), size=K)
    lar = tuple(
        LarParams(phi=rng.uniform(-1.0, 1.0, p + 1), h=rng.uniform(0.5 * pooled_sd, 1.5 * pooled_sd))
        for _ in range(K)
    )
    return ModelParams(hyper=hyper, phmc=PhmcParams(pi=pi, A=A), lar=lar, g0=g0)


def em_init(
    data: Sequence[LabeledSequence], hyper: Hyper, cfg: EmConfig
) -> ModelParams:
    """Multi-restart search for a starting point.

    Draws ``cfg.restarts`` random parameter sets, runs EM for
    ``cfg.restart_iters`` iterations from each, and returns the
    parameters with the highest recorded likelihood.  Restarts that
    abort are skipped.

    Raises
    ------
    InitFailed
        If every restart aborts.
    """
    if len(data) == 0:
        raise EmptyInput("no training sequences")
    rng = np.random.default_rng(cfg.seed)
    pooled_sd = float(np.concatenate([seq.series for seq in data]).std())
    if pooled_sd <= 0.0:
        pooled_sd = 1.0
    g0 = fit_g0([seq.initial for seq in data])

    best: ModelParams | None = None
    best_ll = -np.inf
    for _ in range(cfg.restarts):
        start = _random_start(hyper, pooled_sd, g0, rng)
        try:
            report = em_fit(data, hyper, start, cfg, max_iter=cfg.restart_iters)
        except NumericFailure:
            continue
        if report.loglik_trace[-1] > best_ll:
            best_ll = report.loglik_trace[-1]
            best = report.model
    if best is None:
        raise InitFailed("all EM restarts aborted")
    return best


def train(
    data: Sequence[LabeledSequence], hyper: Hyper, cfg: EmConfig
) -> FitReport:
    """Full training protocol: multi-restart initialization, then EM."""
    start = em_init(data, hyper, cfg)
    return em_fit(data, hyper, start, cfg)
