import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inferact.control import action_alphabet
from inferact.environment import (
    EnvState,
    GroundTruthProfile,
    SyntheticEnvironment,
    default_profile,
    env_step,
    quantize,
    scale_scores,
)


def flat_profile(p=2, s=2, prompt=0.5, search=0.5, noise=0.0):
    return GroundTruthProfile(np.full((p, 3), prompt), np.full((s, 3), search), noise_sd=noise)


class TestStep:
    def test_perfect_prompt_hits_top_level(self):
        prof = GroundTruthProfile([[1.0, 1.0, 1.0], [0.2, 0.2, 0.2]], [[0.5, 0.5, 0.5]], noise_sd=0.0)
        state, obs = env_step(EnvState(), (1, 0, 0), prof, np.random.default_rng(0))
        assert obs[:3] == [10, 10, 10] and state.current_prompt == 0

    def test_certain_search_raises_info(self):
        prof = GroundTruthProfile([[0.5] * 3], [[0.3, 1.0, 0.7]], noise_sd=0.0)
        state, obs = env_step(EnvState(), (0, 1, 0), prof, np.random.default_rng(0))
        assert state.info_level == 1 and obs[6] == 1
        assert obs[3:6] == [3, 10, 7]

    def test_info_level_caps(self):
        prof = GroundTruthProfile([[0.5] * 3], [[0.3, 1.0, 0.7]], noise_sd=0.0)
        state = EnvState(info_level=2)
        state, obs = env_step(state, (0, 1, 0), prof, np.random.default_rng(0))
        assert state.info_level == 2 and obs[6] == 2

    def test_idle_resets_search_and_prompt_keeps_it(self):
        prof = flat_profile(3, 3)
        rng = np.random.default_rng(0)
        state, _ = env_step(EnvState(0, 2, 0), (2, 0, 0), prof, rng)
        assert state == EnvState(1, 2, 0)
        state, _ = env_step(state, (0, 0, 0), prof, rng)
        assert state == EnvState(1, 0, 0)

    def test_illegal_actions(self):
        prof = flat_profile()
        with pytest.raises(ValueError):
            env_step(EnvState(), (1, 1, 0), prof, np.random.default_rng(0))
        with pytest.raises(ValueError):
            env_step(EnvState(), (3, 0, 0), prof, np.random.default_rng(0))

    def test_same_seed_same_observations(self):
        prof = default_profile(5, 3, seed=4)
        actions = [(1, 0, 0), (0, 2, 0), (0, 0, 0), (5, 0, 0)] * 5
        runs = []
        for _ in range(2):
            env = SyntheticEnvironment(prof, seed=9)
            runs.append([env.reset()] + [env.step(a) for a in actions])
        assert runs[0] == runs[1]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_fuzz_observations_in_range_and_info_monotone(self, seed):
        rng = np.random.default_rng(seed)
        P, S = int(rng.integers(2, 8)), int(rng.integers(2, 6))
        prof = GroundTruthProfile(rng.uniform(0, 1, (P, 3)), rng.uniform(0, 1, (S, 3)), noise_sd=0.3)
        alphabet = action_alphabet(P, S)
        state, level = EnvState(), 0
        for _ in range(400):
            state, obs = env_step(state, alphabet[int(rng.integers(len(alphabet)))], prof, rng)
            assert all(0 <= o <= 10 for o in obs[:6]) and obs[6] in (0, 1, 2)
            assert state.info_level >= level
            level = state.info_level


class TestScores:
    @pytest.mark.parametrize("score,index", [(0.0, 0), (1.0, 10), (0.5, 5), (0.7, 7)])
    def test_grid(self, score, index):
        assert scale_scores([score]) == [index]

    def test_quantize_rounds_half_up(self):
        assert quantize(0.73) == 7
        assert quantize(0.75) == 8
        assert quantize(1.4) == 10 and quantize(-0.2) == 0

    def test_off_grid_is_rounded_with_warning(self, caplog):
        assert scale_scores([0.85, 0.73]) == [9, 7]
        assert "off the 11-point grid" in caplog.text

    @pytest.mark.parametrize("bad", [1.3, -0.1, float("nan")])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            scale_scores([bad])


class TestProfile:
    def test_default_profile_has_good_prompts(self):
        prof = default_profile(10, 4, seed=1)
        good = prof.prompt_quality.min(axis=1) >= 0.8
        assert good.sum() == 2
        assert np.all(prof.prompt_quality[~good] <= 0.5)
        assert prof.best_prompt() - 1 in np.flatnonzero(good)

    def test_round_trip(self, tmp_path):
        prof = default_profile(5, 3, seed=2)
        prof.save(tmp_path / "p.json")
        again = GroundTruthProfile.load(tmp_path / "p.json")
        np.testing.assert_array_equal(again.prompt_quality, prof.prompt_quality)
        assert again.seed == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            GroundTruthProfile([[1.2, 0, 0]], [[0, 0, 0]])
        with pytest.raises(ValueError):
            GroundTruthProfile([[0.1, 0.1]], [[0, 0, 0]])
        with pytest.raises(ValueError):
            default_profile(4, 2, num_good=5)
        with pytest.raises(ValueError):
            default_profile(4, 2, search_range=(0.6, 0.2))
