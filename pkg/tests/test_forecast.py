"""Multi-horizon forecasting and predictive state weights."""

import numpy as np
import pytest

from phmclar import (
    Hyper,
    InitialLaw,
    InvalidConfig,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    PhmcParams,
    forecast,
    predictive_state_weights,
    simulate,
    smooth,
)

from conftest import random_instance, random_model


def two_state(A, phis, hs=(1.0, 1.0), pi=(0.5, 0.5)):
    return ModelParams(
        hyper=Hyper(2, 1),
        phmc=PhmcParams(pi=pi, A=A),
        lar=tuple(LarParams(phi, h) for phi, h in zip(phis, hs)),
        g0=InitialLaw([0.0], [[1.0]]),
    )


class TestPredictiveStateWeights:
    def test_identity_chain_freezes_distribution(self):
        m = two_state(np.eye(2), [[0.0, 0.1], [1.0, 0.2]])
        gamma = np.array([0.3, 0.7])
        rows = predictive_state_weights(m, gamma, [LabelSet.full(2)] * 4)
        assert np.allclose(rows, gamma, atol=1e-12)

    def test_observed_horizon_is_one_hot(self):
        m = two_state([[0.9, 0.1], [0.2, 0.8]], [[0.0, 0.1], [1.0, 0.2]])
        gamma = np.array([1.0, 0.0])
        rows = predictive_state_weights(
            m, gamma, [LabelSet.single(1), LabelSet.full(2)]
        )
        assert np.allclose(rows[0], [0.0, 1.0], atol=1e-12)
        # Propagation resumes from the pinned state.
        assert np.allclose(rows[1], m.phmc.A[1], atol=1e-12)

    def test_uniform_chain_mixes_to_uniform(self):
        m = two_state(np.full((2, 2), 0.5), [[0.0, 0.1], [1.0, 0.2]])
        rows = predictive_state_weights(m, [0.9, 0.1], [LabelSet.full(2)] * 3)
        assert np.allclose(rows, 0.5, atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            K = int(rng.integers(1, 5))
            m = random_model(K, 1, rng)
            gamma = rng.dirichlet(np.ones(K))
            labels = [
                LabelSet.single(int(rng.integers(K)))
                if rng.random() < 0.5
                else LabelSet.full(K)
                for _ in range(5)
            ]
            rows = predictive_state_weights(m, gamma, labels)
            assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-9)


class TestForecast:
    def test_known_next_state_gives_its_conditional_mean(self):
        rng = np.random.default_rng(1)
        m = random_model(3, 2, rng)
        _, seq = simulate(m, 20, seed=2)
        k = 1
        result = forecast(m, seq, 1, [LabelSet.single(k)])
        lar = m.lar[k]
        lags = seq.series[-1], seq.series[-2]
        expected = lar.phi[0] + lar.phi[1] * lags[0] + lar.phi[2] * lags[1]
        assert result.predictions[0] == pytest.approx(expected, abs=1e-12)
        assert np.allclose(result.state_weights[0], [0.0, 1.0, 0.0])

    def test_single_state_is_deterministic_recursion(self):
        m = ModelParams(
            hyper=Hyper(1, 1),
            phmc=PhmcParams([1.0], [[1.0]]),
            lar=(LarParams([0.4, 0.8], 0.5),),
            g0=InitialLaw([0.0], [[1.0]]),
        )
        _, seq = simulate(m, 15, seed=3)
        result = forecast(m, seq, 5)
        x = float(seq.series[-1])
        for h in range(5):
            x = 0.4 + 0.8 * x
            assert result.predictions[h] == pytest.approx(x, abs=1e-12)

    def test_two_state_two_horizons_hand_computed(self):
        A = np.array([[0.7, 0.3], [0.4, 0.6]])
        m = two_state(A, [[1.0, 0.5], [-1.0, 0.25]], hs=(0.5, 0.5))
        _, seq = simulate(m, 10, seed=4)
        gamma_T = smooth(m, seq).gamma[-1]
        result = forecast(m, seq, 2)

        w1 = A.T @ gamma_T
        x_T = float(seq.series[-1])
        mean1 = np.array([1.0 + 0.5 * x_T, -1.0 + 0.25 * x_T])
        xhat1 = float(w1 @ mean1)
        assert np.allclose(result.state_weights[0], w1, atol=1e-12)
        assert result.predictions[0] == pytest.approx(xhat1, abs=1e-12)

        w2 = A.T @ w1
        mean2 = np.array([1.0 + 0.5 * xhat1, -1.0 + 0.25 * xhat1])
        assert np.allclose(result.state_weights[1], w2, atol=1e-12)
        assert result.predictions[1] == pytest.approx(float(w2 @ mean2), abs=1e-12)

    def test_prediction_within_conditional_mean_hull(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m, seq = random_instance(rng, kmax=3, tmax=8)
            result = forecast(m, seq, 4)
            p = m.hyper.p
            history = np.concatenate([seq.initial, seq.series, result.predictions])
            base = len(seq.initial) + len(seq.series)
            for h in range(4):
                lags = history[base + h - p : base + h][::-1]
                means = [
                    lar.phi[0] + float(lar.phi[1:] @ lags) for lar in m.lar
                ]
                assert min(means) - 1e-9 <= result.predictions[h] <= max(means) + 1e-9

    def test_all_states_known_is_per_state_recursion(self):
        rng = np.random.default_rng(6)
        m = random_model(3, 1, rng)
        _, seq = simulate(m, 12, seed=7)
        path = [2, 0, 1, 1]
        result = forecast(m, seq, 4, [LabelSet.single(s) for s in path])
        x = float(seq.series[-1])
        for h, s in enumerate(path):
            lar = m.lar[s]
            x = lar.phi[0] + lar.phi[1] * x
            assert result.predictions[h] == pytest.approx(x, abs=1e-12)

    def test_known_state_one_step_error_is_noise_scale(self, generator4):
        # With the generative model itself and the next state revealed,
        # the residual is exactly that state's innovation, so the RMSE
        # across replicates approaches sqrt(mean of h^2) under the
        # uniform stationary law.
        rng = np.random.default_rng(10)
        truths, preds = [], []
        for _ in range(300):
            states, seq = simulate(generator4, 31, int(rng.integers(2**31)))
            prefix = LabeledSequence(seq.initial, seq.series[:30], seq.labels[:30])
            result = forecast(
                generator4, prefix, 1, [LabelSet.single(int(states[30]))]
            )
            truths.append(float(seq.series[30]))
            preds.append(float(result.predictions[0]))
        rmse = float(np.sqrt(np.mean((np.array(truths) - np.array(preds)) ** 2)))
        hs = np.array([lar.h for lar in generator4.lar])
        expected = float(np.sqrt(np.mean(hs**2)))
        assert rmse == pytest.approx(expected, abs=0.08)

    def test_zero_horizon_rejected(self):
        rng = np.random.default_rng(8)
        m, seq = random_instance(rng)
        with pytest.raises(InvalidConfig):
            forecast(m, seq, 0)

    def test_wrong_label_count_rejected(self):
        rng = np.random.default_rng(9)
        m, seq = random_instance(rng)
        with pytest.raises(InvalidConfig):
            forecast(m, seq, 3, [LabelSet.full(m.hyper.K)])
