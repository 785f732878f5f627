import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inferact.learning import LearningConfig, update_likelihood, update_transitions
from inferact.maths import entropy
from inferact.model import DirichletState, normalize_dirichlet


def state_2x2():
    return DirichletState(pA=[np.ones((2, 2))], pB=[np.ones((3, 3, 1))])


class TestLikelihoodUpdate:
    def test_one_hot_belief(self):
        d = update_likelihood(state_2x2(), [0], [np.array([1.0, 0.0])], LearningConfig(eta=1), [[0]])
        np.testing.assert_array_equal(d.pA[0], [[2, 1], [1, 1]])

    def test_spread_belief(self):
        d = update_likelihood(state_2x2(), [0], [np.array([0.5, 0.5])], LearningConfig(eta=1), [[0]])
        np.testing.assert_array_equal(d.pA[0], [[1.5, 1.5], [1, 1]])

    def test_default_rate(self):
        d = update_likelihood(state_2x2(), [0], [np.array([1.0, 0.0])], LearningConfig(eta=50), [[0]])
        A, _ = normalize_dirichlet(d)
        np.testing.assert_allclose(A[0][:, 0], [51 / 52, 1 / 52])

    def test_input_is_not_modified(self):
        d0 = state_2x2()
        update_likelihood(d0, [1], [np.array([1.0, 0.0])], LearningConfig(eta=3), [[0]])
        np.testing.assert_array_equal(d0.pA[0], np.ones((2, 2)))

    def test_mask_blocks_updates(self):
        d0 = DirichletState(pA=[np.array([[1.0, 0.0], [1.0, 1.0]])], pB=[np.ones((2, 2, 1))])
        d = update_likelihood(d0, [0], [np.array([0.5, 0.5])], LearningConfig(eta=4), [[0]])
        assert d.pA[0][0, 1] == 0.0 and d.pA[0][0, 0] == 3.0

    def test_disabled_modality(self):
        cfg = LearningConfig(eta=1, modality_mask=[False])
        d = update_likelihood(state_2x2(), [0], [np.array([1.0, 0.0])], cfg, [[0]])
        np.testing.assert_array_equal(d.pA[0], np.ones((2, 2)))

    def test_bad_observation(self):
        with pytest.raises(ValueError):
            update_likelihood(state_2x2(), [2], [np.array([1.0, 0.0])], LearningConfig(), [[0]])

    def test_eta_must_be_positive(self):
        with pytest.raises(ValueError):
            LearningConfig(eta=0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40))
    def test_entropy_falls_with_repeated_observation(self, n):
        d = state_2x2()
        cfg = LearningConfig(eta=1)
        last = entropy(normalize_dirichlet(d)[0][0][:, 0])
        for _ in range(n):
            d = update_likelihood(d, [0], [np.array([1.0, 0.0])], cfg, [[0]])
            h = entropy(normalize_dirichlet(d)[0][0][:, 0])
            assert h < last
            last = h


class TestTransitionUpdate:
    def test_one_hot_transition(self):
        d = update_transitions(state_2x2(), [np.array([1.0, 0, 0])], [np.array([0.0, 1, 0])], [0],
                               LearningConfig(eta=1, factor_mask=[True]))
        expected = np.ones((3, 3, 1))
        expected[1, 0, 0] = 2
        np.testing.assert_array_equal(d.pB[0], expected)

    def test_self_transition(self):
        q = [np.array([0.0, 0, 1])]
        d = update_transitions(state_2x2(), q, q, [0], LearningConfig(eta=1, factor_mask=[True]))
        diff = d.pB[0] - 1
        assert diff[2, 2, 0] == 1 and np.count_nonzero(diff) == 1

    def test_disabled(self):
        d0 = state_2x2()
        d = update_transitions(d0, [np.ones(3) / 3], [np.ones(3) / 3], [0], LearningConfig(learn_B=False))
        np.testing.assert_array_equal(d.pB[0], d0.pB[0])

    def test_default_learns_only_the_info_factor(self):
        cfg = LearningConfig()
        assert cfg.factors(3) == [False, False, True]
        pB = [np.ones((2, 2, 3)), np.ones((2, 2, 3)), np.ones((2, 2, 1))]
        d0 = DirichletState(pA=[np.ones((2, 2))], pB=pB)
        q = [np.array([1.0, 0.0])] * 3
        d = update_transitions(d0, q, q, [1, 0, 0], cfg)
        np.testing.assert_array_equal(d.pB[0], pB[0])
        assert d.pB[2][0, 0, 0] == 51.0

    def test_control_out_of_range(self):
        with pytest.raises(ValueError):
            update_transitions(state_2x2(), [np.ones(3) / 3], [np.ones(3) / 3], [1], LearningConfig())
