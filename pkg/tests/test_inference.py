import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_column_stochastic, toy_model
from inferact.inference import (
    compute_vfe,
    infer_states,
    log_evidence,
    predict_observations,
    predict_states,
)
from inferact.model import build_research_model

SMALL = {"prompts": 5, "searches": 3, "info_levels": 3, "quality_levels": 11}


class TestInferStates:
    def test_identity_likelihood(self):
        m = toy_model([np.eye(2)])
        q = infer_states(m, m.D, [0])
        np.testing.assert_allclose(q[0], [1.0, 0.0], atol=1e-15)

    def test_noisy_likelihood(self):
        m = toy_model([[[0.75, 0.25], [0.25, 0.75]]])
        q = infer_states(m, m.D, [0])
        np.testing.assert_allclose(q[0], [0.75, 0.25], atol=1e-12)

    def test_unobserved_factor_keeps_prior(self):
        prior1 = np.array([0.2, 0.3, 0.5])
        m = toy_model([[[0.9, 0.1], [0.1, 0.9]]], B=[np.eye(2)[:, :, None], np.eye(3)[:, :, None]],
                      D=[np.array([0.5, 0.5]), prior1], A_deps=[[0]])
        q = infer_states(m, m.D, [1])
        np.testing.assert_allclose(q[1], prior1, atol=1e-15)
        np.testing.assert_allclose(q[0], [0.1, 0.9], atol=1e-12)

    def test_zero_likelihood_row_warns_and_keeps_prior(self, caplog):
        m = toy_model([[[1.0, 1.0], [0.0, 0.0]]])
        q = infer_states(m, m.D, [1])
        np.testing.assert_allclose(q[0], [0.5, 0.5])
        assert "zero likelihood" in caplog.text

    def test_rejects_bad_observation(self):
        m = toy_model([np.eye(2)])
        with pytest.raises(ValueError):
            infer_states(m, m.D, [2])
        with pytest.raises(ValueError):
            infer_states(m, m.D, [0, 1])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 5), st.integers(2, 6), st.integers(0, 10_000))
    def test_single_factor_is_exact_bayes(self, n, k, seed):
        rng = np.random.default_rng(seed)
        A = random_column_stochastic(rng, (k, n))
        prior = rng.dirichlet(np.ones(n))
        o = int(rng.integers(k))
        m = toy_model([A], D=[prior])
        q = infer_states(m, [prior], [o])
        exact = A[o] * prior / (A[o] @ prior)
        np.testing.assert_allclose(q[0], exact, atol=1e-10)


class TestFreeEnergy:
    def test_tight_at_exact_posterior(self):
        m = toy_model([np.eye(2)])
        q = infer_states(m, m.D, [0])
        assert compute_vfe(m, q, [0]) == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_prior_with_flat_likelihood(self):
        m = toy_model([np.full((2, 2), 0.5)])
        assert compute_vfe(m, m.D, [0]) == pytest.approx(math.log(2), abs=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_bound_holds_for_any_beliefs(self, seed):
        rng = np.random.default_rng(seed)
        sizes = [2, 3]
        A = [random_column_stochastic(rng, (3, 2, 3)), random_column_stochastic(rng, (2, 3))]
        m = toy_model(A, B=[np.eye(n)[:, :, None] for n in sizes], A_deps=[[0, 1], [1]])
        obs = [int(rng.integers(3)), int(rng.integers(2))]
        surprise = -log_evidence(m, m.D, obs)
        q = [rng.dirichlet(np.ones(n)) for n in sizes]
        assert compute_vfe(m, q, obs) >= surprise - 1e-12
        q_star = infer_states(m, m.D, obs, iters=50)
        assert compute_vfe(m, q_star, obs) >= surprise - 1e-12

    def test_log_evidence_matches_enumeration(self, rng):
        A = [random_column_stochastic(rng, (3, 2, 3))]
        m = toy_model(A, B=[np.eye(2)[:, :, None], np.eye(3)[:, :, None]], A_deps=[[0, 1]])
        total = sum(A[0][1, i, j] * m.D[0][i] * m.D[1][j] for i, j in itertools.product(range(2), range(3)))
        assert log_evidence(m, m.D, [1]) == pytest.approx(math.log(total), abs=1e-14)


class TestPrediction:
    def test_identity_transition(self, rng):
        m = toy_model([np.eye(3)])
        q = [rng.dirichlet(np.ones(3))]
        np.testing.assert_allclose(predict_states(m, q, [0])[0], q[0])

    def test_prompt_control_is_one_hot(self, rng):
        model, _ = build_research_model(SMALL)
        q = [rng.dirichlet(np.ones(n)) for n in model.num_states]
        out = predict_states(model, q, (4, 0, 0))
        np.testing.assert_array_equal(out[0], np.eye(5)[3])

    def test_idle_search_moves_towards_zero(self, rng):
        model, _ = build_research_model(SMALL)
        for q1 in (np.full(3, 1 / 3), np.array([0.0, 0.0, 1.0]), np.array([0.2, 0.5, 0.3])):
            q = [model.D[0], q1, model.D[2]]
            out = predict_states(model, q, (0, 0, 0))
            assert out[1][0] > q1[0]
            np.testing.assert_allclose(out[0], model.D[0])

    def test_rejects_bad_controls(self):
        m = toy_model([np.eye(2)])
        with pytest.raises(ValueError):
            predict_states(m, m.D, [1])
        with pytest.raises(ValueError):
            predict_states(m, m.D, [0, 0])

    def test_predicted_observations(self):
        np.testing.assert_allclose(predict_observations(toy_model([np.full((2, 2), 0.5)]), [np.array([0.9, 0.1])])[0],
                                   [0.5, 0.5])
        np.testing.assert_allclose(predict_observations(toy_model([np.eye(2)]), [np.array([1.0, 0.0])])[0], [1, 0])
        m = toy_model([[[0.75, 0.25], [0.25, 0.75]]])
        np.testing.assert_allclose(predict_observations(m, [np.array([0.5, 0.5])])[0], [0.5, 0.5])
