"""Seeded synthetic stand-in for the LLM-scored research environment.

Each prompt state and search state has mean scores in [0, 1] for three
metrics. Observations are the noisy means quantised to the 11-point grid.
Search actions may raise the information level; nothing lowers it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .control import check_action

logger = logging.getLogger(__name__)

PROFILE_SCHEMA = "inferact-profile/1"
PROMPT_METRICS = ("accuracy", "relevance", "comprehensiveness")
SEARCH_METRICS = ("info_relevance", "info_usefulness", "source_quality")
USEFULNESS = 1
GRID_TOL = 1e-9


@dataclass
class GroundTruthProfile:
    prompt_quality: np.ndarray  # (num_prompts, 3)
    search_quality: np.ndarray  # (num_searches, 3)
    noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        self.prompt_quality = np.asarray(self.prompt_quality, dtype=float)
        self.search_quality = np.asarray(self.search_quality, dtype=float)
        for name, arr in (("prompt_quality", self.prompt_quality), ("search_quality", self.search_quality)):
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError(f"{name} means must lie in [0, 1]")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    @property
    def num_prompts(self) -> int:
        return self.prompt_quality.shape[0]

    @property
    def num_searches(self) -> int:
        return self.search_quality.shape[0]

    def best_prompt(self) -> int:
        """Prompt action (1-based) with the highest mean score; lowest index on ties."""
        return int(np.argmax(self.prompt_quality.mean(axis=1))) + 1

    def to_dict(self) -> dict:
        return {
            "version": PROFILE_SCHEMA,
            "prompt_quality": self.prompt_quality.tolist(),
            "search_quality": self.search_quality.tolist(),
            "noise_sd": self.noise_sd,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruthProfile":
        if doc.get("version") != PROFILE_SCHEMA:
            raise ValueError(f"unsupported profile version {doc.get('version')!r}")
        return cls(doc["prompt_quality"], doc["search_quality"], float(doc["noise_sd"]), int(doc["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "GroundTruthProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_profile(
    num_prompts: int,
    num_searches: int,
    seed: int = 0,
    num_good: Optional[int] = None,
    noise_sd: float = 0.05,
    search_range: tuple = (0.2, 0.5),
) -> GroundTruthProfile:
    """Random profile: a few "good" prompts (means >= 0.8), the rest mediocre (0.2-0.5).

    ``num_good`` defaults to 20% of the prompts (at least one). Search means
    are drawn uniformly from ``search_range``.
    """
    rng = np.random.default_rng(seed)
    if num_good is None:
        num_good = max(1, int(round(0.2 * num_prompts)))
    if not 0 < num_good <= num_prompts:
        raise ValueError("num_good must be between 1 and num_prompts")
    prompt = rng.uniform(0.2, 0.5, size=(num_prompts, 3))
    good = rng.choice(num_prompts, size=num_good, replace=False)
    prompt[good] = rng.uniform(0.8, 1.0, size=(num_good, 3))
    lo, hi = (float(x) for x in search_range)
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"search_range must satisfy 0 <= lo <= hi <= 1, got {search_range!r}")
    search = rng.uniform(lo, hi, size=(num_searches, 3))
    return GroundTruthProfile(prompt, search, noise_sd=noise_sd, seed=seed)


@dataclass(frozen=True)
class EnvState:
    current_prompt: int = 0
    current_search: int = 0
    info_level: int = 0


def quantize(score: float, levels: int = 11) -> int:
    """Clip to [0, 1] and round half-up onto ``levels`` grid points."""
    x = min(max(float(score), 0.0), 1.0)
    return int(np.floor(x * (levels - 1) + 0.5))


def scale_scores(scores: Sequence[float], levels: int = 11) -> list[int]:
    """Map grid scores in [0, 1] to observation indices ``round(score * 10)``.

    Off-grid scores are rounded to the nearest grid point with a warning.
    """
    out = []
    for x in scores:
        x = float(x)
        if not np.isfinite(x) or x < -GRID_TOL or x > 1 + GRID_TOL:
            raise ValueError(f"score {x!r} outside [0, 1]")
        scaled = x * (levels - 1)
        idx = quantize(x, levels)
        if abs(scaled - idx) > GRID_TOL * (levels - 1):
            logger.warning("score %r is off the %d-point grid; rounding to %d", x, levels, idx)
        out.append(idx)
    return out


def env_step(
    state: EnvState,
    action: Sequence[int],
    profile: GroundTruthProfile,
    rng: np.random.Generator,
    info_levels: int = 3,
    quality_levels: int = 11,
) -> tuple[EnvState, list[int]]:
    """Apply one action and emit one observation index per modality.

    A prompt action moves the prompt and leaves the search state alone; a
    search action moves the search and leaves the prompt alone; no action
    sends the search state back to 0. A search action raises the info level
    with probability equal to that search state's mean usefulness.
    """
    check_action(action)
    p, s, _ = (int(x) for x in action)
    if p > profile.num_prompts or s > profile.num_searches:
        raise ValueError(f"action {tuple(action)} exceeds the profile's {profile.num_prompts} prompts / "
                         f"{profile.num_searches} searches")
    prompt = p - 1 if p > 0 else state.current_prompt
    if s > 0:
        search = s - 1
    elif p > 0:
        search = state.current_search
    else:
        search = 0
    info = state.info_level
    advance = rng.random()
    if s > 0 and advance < profile.search_quality[search, USEFULNESS]:
        info = min(info + 1, info_levels - 1)
    new_state = EnvState(prompt, search, info)
    return new_state, observe(new_state, profile, rng, quality_levels)


def observe(state: EnvState, profile: GroundTruthProfile, rng: np.random.Generator, quality_levels: int = 11) -> list[int]:
    means = np.concatenate([profile.prompt_quality[state.current_prompt], profile.search_quality[state.current_search]])
    noisy = means + rng.normal(0.0, profile.noise_sd, size=6)
    return [quantize(x, quality_levels) for x in noisy] + [state.info_level]


@dataclass
class SyntheticEnvironment:
    """Stateful wrapper around ``env_step`` with its own seeded generator."""

    profile: GroundTruthProfile
    seed: int = 0
    info_levels: int = 3
    quality_levels: int = 11
    state: EnvState = field(default_factory=EnvState)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def reset(self) -> list[int]:
        self.rng = np.random.default_rng(self.seed)
        self.state = EnvState()
        return observe(self.state, self.profile, self.rng, self.quality_levels)

    def step(self, action: Sequence[int]) -> list[int]:
        self.state, obs = env_step(self.state, action, self.profile, self.rng, self.info_levels, self.quality_levels)
        return obs
