"""Constrained most-probable-path decoding against enumeration."""

import numpy as np
import pytest

from phmclar import (
    Hyper,
    InitialLaw,
    LabeledSequence,
    LabelSet,
    LarParams,
    ModelParams,
    NoAdmissiblePath,
    PhmcParams,
    TooLarge,
    brute_force_decode,
    simulate,
    viterbi,
)

from conftest import random_instance, random_model


class TestViterbi:
    def test_fully_observed_path_equals_labels(self):
        rng = np.random.default_rng(0)
        m = random_model(3, 1, rng)
        states, seq = simulate(m, 12, seed=1)
        decoded = viterbi(m, seq)
        assert np.array_equal(decoded.states, states)
        assert np.array_equal(brute_force_decode(m, seq).states, states)

    def test_single_state_chain(self):
        m = ModelParams(
            hyper=Hyper(1, 1),
            phmc=PhmcParams([1.0], [[1.0]]),
            lar=(LarParams([0.0, 0.3], 1.0),),
            g0=InitialLaw([0.0], [[1.0]]),
        )
        _, seq = simulate(m, 9, seed=2)
        decoded = viterbi(m, seq)
        assert np.array_equal(decoded.states, np.zeros(9, dtype=int))

    def test_oracle_equivalence_random_panel(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            m, seq = random_instance(rng)
            try:
                fast = viterbi(m, seq)
            except NoAdmissiblePath:
                with pytest.raises(NoAdmissiblePath):
                    brute_force_decode(m, seq)
                continue
            slow = brute_force_decode(m, seq)
            assert np.array_equal(fast.states, slow.states)
            assert fast.log_joint == pytest.approx(slow.log_joint, abs=1e-10)

    def test_constraints_respected(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m, seq = random_instance(rng)
            decoded = viterbi(m, seq)
            for t, lab in enumerate(seq.labels):
                assert lab.contains(int(decoded.states[t]))

    def test_no_admissible_path(self):
        m = ModelParams(
            hyper=Hyper(2, 1),
            phmc=PhmcParams([1.0, 0.0], [[1.0, 0.0], [0.5, 0.5]]),
            lar=(LarParams([0.0, 0.1], 1.0), LarParams([0.0, 0.2], 1.0)),
            g0=InitialLaw([0.0], [[1.0]]),
        )
        seq = LabeledSequence(
            [0.0], [0.1, 0.2], (LabelSet.single(0), LabelSet.single(1))
        )
        with pytest.raises(NoAdmissiblePath):
            viterbi(m, seq)
        with pytest.raises(NoAdmissiblePath):
            brute_force_decode(m, seq)

    def test_tie_break_prefers_smaller_state(self):
        # Symmetric model and symmetric labels: states 0 and 1 are
        # exchangeable at step 2, so (0, 0, 0) and (0, 1, 0) tie exactly.
        m = ModelParams(
            hyper=Hyper(2, 1),
            phmc=PhmcParams([1.0, 0.0], [[0.5, 0.5], [0.5, 0.5]]),
            lar=(LarParams([0.0, 0.0], 1.0), LarParams([0.0, 0.0], 1.0)),
            g0=InitialLaw([0.0], [[1.0]]),
        )
        seq = LabeledSequence(
            [0.0],
            [0.3, -0.2, 0.4],
            (LabelSet.single(0), LabelSet.full(2), LabelSet.single(0)),
        )
        fast = viterbi(m, seq)
        slow = brute_force_decode(m, seq)
        assert np.array_equal(fast.states, [0, 0, 0])
        assert np.array_equal(slow.states, [0, 0, 0])
        assert fast.log_joint == pytest.approx(slow.log_joint, abs=1e-12)

    def test_monotone_information(self):
        # Revealing one correct state (from the optimum) never hurts.
        rng = np.random.default_rng(5)
        for _ in range(40):
            m, seq = random_instance(rng, kmax=3, tmax=6)
            try:
                base = brute_force_decode(m, seq)
            except NoAdmissiblePath:
                continue
            t = int(rng.integers(len(seq)))
            labels = list(seq.labels)
            labels[t] = LabelSet.single(int(base.states[t]))
            pinned = LabeledSequence(seq.initial, seq.series, tuple(labels))
            refined = viterbi(m, pinned)
            assert refined.log_joint >= base.log_joint - 1e-12

    def test_log_joint_is_path_score(self):
        rng = np.random.default_rng(6)
        m, seq = random_instance(rng, kmax=3, tmax=7)
        decoded = viterbi(m, seq)
        from phmclar import log_emission_matrix

        logb = log_emission_matrix(m, seq)
        z = decoded.states
        score = np.log(m.phmc.pi[z[0]]) + logb[0, z[0]]
        for t in range(1, len(seq)):
            score += np.log(m.phmc.A[z[t - 1], z[t]]) + logb[t, z[t]]
        assert decoded.log_joint == pytest.approx(float(score), abs=1e-10)

    def test_cap_enforced(self):
        rng = np.random.default_rng(7)
        m = random_model(4, 1, rng)
        _, seq = simulate(m, 11, seed=8)
        with pytest.raises(TooLarge):
            brute_force_decode(m, seq)
