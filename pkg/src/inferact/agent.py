"""The observe / infer / score / select / act / learn loop and its run log."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .control import (
    action_alphabet,
    action_kind,
    check_action,
    enumerate_policies,
    policy_posterior,
    score_policies,
    select_action,
)
from .environment import GroundTruthProfile, SyntheticEnvironment, default_profile
from .inference import compute_vfe, infer_states, log_evidence, predict_states
from .learning import LearningConfig, update_likelihood, update_transitions
from .maths import NORM_TOL
from .model import (
    IDLE_MODES,
    DirichletState,
    GenerativeModel,
    build_research_model,
    model_to_dict,
    normalize_dirichlet,
    validate_model,
)

logger = logging.getLogger(__name__)

LOG_SCHEMA = "inferact-log/1"


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    prompts: int = 33
    searches: int = 11
    info_levels: int = 3
    quality_levels: int = 11
    eta: float = 50.0
    gamma: float = 8.0
    alpha: float = 16.0
    horizon: int = 2
    policy_mode: str = "cartesian"
    selection: str = "stochastic"
    steps: int = 100
    seed: int = 0
    env: str = "synthetic"
    profile_path: Optional[str] = None
    profile_seed: Optional[int] = None
    num_good: Optional[int] = None
    noise_sd: float = 0.05
    search_range: list = field(default_factory=lambda: [0.2, 0.5])
    idle: str = "soft"
    endpoint: Optional[str] = None
    model_name: str = "gpt-4o-mini"
    request_timeout: float = 30.0
    max_retries: int = 3
    prompt_texts: Optional[list] = None
    search_texts: Optional[list] = None
    question: str = ""
    transcript_path: Optional[str] = None
    infer_iters: int = 10
    learn_A: bool = True
    learn_B: bool = True
    learn_all_B: bool = False
    use_state_info_gain: bool = True
    use_param_info_gain: bool = True
    habits: Optional[list] = None
    top_k: int = 5
    early_stop: int = 0
    snapshot_interval: int = 0
    record_timing: bool = False
    check_invariants: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("prompts", "searches", "info_levels", "quality_levels"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 2:
                raise ConfigError(f"{name}: must be an integer >= 2, got {value!r}")
        for name in ("eta", "gamma", "alpha"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be > 0, got {getattr(self, name)!r}")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError(f"steps: must be an integer >= 1, got {self.steps!r}")
        if not isinstance(self.horizon, int) or self.horizon < 1:
            raise ConfigError(f"horizon: must be an integer >= 1, got {self.horizon!r}")
        if self.policy_mode not in ("cartesian", "repeated"):
            raise ConfigError(f"policy_mode: expected 'cartesian' or 'repeated', got {self.policy_mode!r}")
        if self.selection not in ("deterministic", "stochastic"):
            raise ConfigError(f"selection: expected 'deterministic' or 'stochastic', got {self.selection!r}")
        if self.env not in ("synthetic", "remote"):
            raise ConfigError(f"env: expected 'synthetic' or 'remote', got {self.env!r}")
        if self.env == "remote" and not self.endpoint:
            raise ConfigError("endpoint: required when env is 'remote'")
        if self.idle not in IDLE_MODES:
            raise ConfigError(f"idle: expected one of {', '.join(IDLE_MODES)}, got {self.idle!r}")
        if (len(self.search_range) != 2
                or not 0.0 <= self.search_range[0] <= self.search_range[1] <= 1.0):
            raise ConfigError(f"search_range: expected [lo, hi] with 0 <= lo <= hi <= 1, got {self.search_range!r}")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd: must be >= 0")
        if not self.request_timeout > 0:
            raise ConfigError("request_timeout: must be > 0")
        if not isinstance(self.max_retries, int) or self.max_retries < 0:
            raise ConfigError("max_retries: must be an integer >= 0")
        for name, count in (("prompt_texts", self.prompts), ("search_texts", self.searches)):
            texts = getattr(self, name)
            if texts is not None and len(texts) != count:
                raise ConfigError(f"{name}: expected {count} entries, got {len(texts)}")
        if self.infer_iters < 1:
            raise ConfigError("infer_iters: must be >= 1")
        if self.top_k < 0 or self.early_stop < 0 or self.snapshot_interval < 0:
            raise ConfigError("top_k / early_stop / snapshot_interval: must be >= 0")
        if self.habits is not None and len(self.habits) != self.num_policies:
            raise ConfigError(f"habits: expected {self.num_policies} entries, got {len(self.habits)}")

    @property
    def dims(self) -> dict:
        return {
            "prompts": self.prompts,
            "searches": self.searches,
            "info_levels": self.info_levels,
            "quality_levels": self.quality_levels,
        }

    @property
    def num_policies(self) -> int:
        n = 1 + self.prompts + self.searches
        return n ** self.horizon if self.policy_mode == "cartesian" else n

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown configuration key")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(doc)


@dataclass
class StepRecord:
    step: int
    action: list
    action_type: str
    observation: list
    beliefs: list
    vfe: float
    selected_policy: int
    top_policies: list
    action_G: list
    duration: Optional[float] = None

    def to_dict(self) -> dict:
        return {"schema": LOG_SCHEMA, "kind": "step", **asdict(self)}


@dataclass
class RunResult:
    records: list
    model: GenerativeModel
    dirichlet: DirichletState
    initial_dirichlet: DirichletState
    profile: Optional[GroundTruthProfile] = None
    violations: list = field(default_factory=list)
    log_path: Optional[Path] = None


def belief_rollover(prev_posterior, model: GenerativeModel, action) -> list:
    """Next step's prior: the posterior pushed through the selected action's transitions."""
    return predict_states(model, prev_posterior, action)


def learning_config(cfg: RunConfig, num_factors: int) -> LearningConfig:
    factor_mask = [True] * num_factors if cfg.learn_all_B else None
    return LearningConfig(eta=cfg.eta, learn_A=cfg.learn_A, learn_B=cfg.learn_B, factor_mask=factor_mask)


def refresh_model(model: GenerativeModel, dirichlet: DirichletState, lcfg: LearningConfig) -> GenerativeModel:
    """Model whose learned tensors are the current Dirichlet means."""
    A, B = normalize_dirichlet(dirichlet)
    learned_B = lcfg.factors(model.num_factors)
    new_A = A if lcfg.learn_A else model.A
    new_B = [B[f] if learned_B[f] else model.B[f] for f in range(model.num_factors)]
    return GenerativeModel(A=new_A, B=new_B, C=model.C, D=model.D, A_deps=model.A_deps, B_deps=model.B_deps)


def resolve_profile(cfg: RunConfig) -> GroundTruthProfile:
    if cfg.profile_path:
        profile = GroundTruthProfile.load(cfg.profile_path)
        if profile.num_prompts != cfg.prompts or profile.num_searches != cfg.searches:
            raise ConfigError(f"profile_path: profile is {profile.num_prompts}x{profile.num_searches}, "
                              f"config wants {cfg.prompts}x{cfg.searches}")
        return profile
    seed = cfg.seed if cfg.profile_seed is None else cfg.profile_seed
    return default_profile(cfg.prompts, cfg.searches, seed=seed, num_good=cfg.num_good, noise_sd=cfg.noise_sd,
                           search_range=tuple(cfg.search_range))


def make_environment(cfg: RunConfig):
    if cfg.env == "synthetic":
        profile = resolve_profile(cfg)
        return SyntheticEnvironment(profile, seed=cfg.seed, info_levels=cfg.info_levels,
                                    quality_levels=cfg.quality_levels), profile
    from .remote import RemoteEnvironment, RemoteEvaluator

    evaluator = RemoteEvaluator(
        endpoint=cfg.endpoint,
        model=cfg.model_name,
        timeout=cfg.request_timeout,
        max_retries=cfg.max_retries,
        transcript_path=cfg.transcript_path,
    )
    env = RemoteEnvironment(
        evaluator,
        prompt_texts=cfg.prompt_texts or [f"Prompt variant {i + 1}" for i in range(cfg.prompts)],
        search_texts=cfg.search_texts or [f"Search query {i + 1}" for i in range(cfg.searches)],
        question=cfg.question,
        info_levels=cfg.info_levels,
        quality_levels=cfg.quality_levels,
    )
    return env, None


def _json_line(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n"


def _runtime_checks(t, model, prior, q, obs, vfe, action, violations):
    for f, qf in enumerate(q):
        if abs(float(np.sum(qf)) - 1.0) > NORM_TOL or np.any(qf < 0):
            violations.append(f"step {t}: belief over factor {f} is not normalised")
    try:
        check_action(action)
    except ValueError as exc:
        violations.append(f"step {t}: {exc}")
    bound = -log_evidence(model, prior, obs)
    if vfe < bound - 1e-8:
        violations.append(f"step {t}: VFE {vfe!r} below surprise bound {bound!r}")
    violations.extend(f"step {t}: {v}" for v in validate_model(model))


def run_experiment(
    cfg: RunConfig,
    log_path=None,
    env=None,
    snapshot_dir=None,
) -> RunResult:
    """Run the agent for ``cfg.steps`` steps (or until the early-stop rule fires).

    Each step observes, infers current states from the rolled-over prior,
    scores every policy, forms the policy posterior, selects the first action,
    steps the environment, and applies the Dirichlet updates for the current
    observation. One JSONL line per step is flushed to ``log_path``.
    """
    cfg.validate()
    model, dirichlet = build_research_model(cfg.dims, idle=cfg.idle)
    initial = dirichlet
    lcfg = learning_config(cfg, model.num_factors)
    model = refresh_model(model, dirichlet, lcfg)
    profile = None
    if env is None:
        env, profile = make_environment(cfg)
    policies = enumerate_policies(cfg.prompts, cfg.searches, cfg.horizon, cfg.policy_mode)
    policy_index = {pi: i for i, pi in enumerate(policies)}
    single = [policy_index[(a,) * cfg.horizon] for a in action_alphabet(cfg.prompts, cfg.searches)]
    habits = None if cfg.habits is None else np.asarray(cfg.habits, dtype=float)
    select_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])

    log = None
    if log_path is not None:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log = log_path.open("w")
        header = {"schema": LOG_SCHEMA, "kind": "header", "config": cfg.to_dict(),
                  "num_policies": len(policies),
                  "profile": profile.to_dict() if profile is not None else None}
        log.write(_json_line(header))
        log.flush()
    if snapshot_dir is not None:
        snapshot_dir = Path(snapshot_dir)
        snapshot_dir.mkdir(parents=True, exist_ok=True)

    records: list[StepRecord] = []
    violations: list[str] = []
    try:
        obs = env.reset()
        prior = [d.copy() for d in model.D]
        q_prev = prev_action = None
        streak, last_choice = 0, None
        for t in range(cfg.steps):
            started = time.perf_counter()
            q = infer_states(model, prior, obs, iters=cfg.infer_iters)
            vfe = compute_vfe(model, q, obs, prior)
            scores = score_policies(model, dirichlet, q, policies,
                                    use_state_info_gain=cfg.use_state_info_gain,
                                    use_param_info_gain=cfg.use_param_info_gain)
            posterior = policy_posterior(scores, cfg.gamma, habits, policies)
            chosen = int(np.argmax(posterior.probs))
            action = tuple(int(u) for u in select_action(posterior, cfg.alpha, cfg.selection, select_rng))
            if cfg.check_invariants:
                _runtime_checks(t, model, prior, q, obs, vfe, action, violations)

            next_obs = env.step(action)

            dirichlet = update_likelihood(dirichlet, obs, q, lcfg, model.A_deps)
            if q_prev is not None:
                dirichlet = update_transitions(dirichlet, q_prev, q, prev_action, lcfg)
            model = refresh_model(model, dirichlet, lcfg)

            order = np.argsort(-posterior.probs, kind="stable")[: cfg.top_k]
            record = StepRecord(
                step=t,
                action=list(action),
                action_type=action_kind(action),
                observation=[int(o) for o in obs],
                beliefs=[qf.tolist() for qf in q],
                vfe=float(vfe),
                selected_policy=chosen,
                top_policies=[
                    {"index": int(i), "policy": [list(a) for a in policies[i]],
                     "prob": float(posterior.probs[i]), **scores[i].to_dict()}
                    for i in order
                ],
                action_G=[float(scores[i].G) for i in single],
                duration=(time.perf_counter() - started) if cfg.record_timing else None,
            )
            records.append(record)
            if log is not None:
                log.write(_json_line(record.to_dict()))
                log.flush()
            if snapshot_dir is not None and cfg.snapshot_interval and (t + 1) % cfg.snapshot_interval == 0:
                (snapshot_dir / f"model_step{t + 1:05d}.json").write_text(
                    json.dumps(model_to_dict(model, dirichlet)))

            prior = belief_rollover(q, model, action)
            q_prev, prev_action, obs = q, action, next_obs

            choice = (action, chosen)
            streak = streak + 1 if choice == last_choice else 1
            last_choice = choice
            if cfg.early_stop and streak >= cfg.early_stop:
                logger.info("early stop at step %d: choice unchanged for %d steps", t, streak)
                break
    finally:
        if log is not None:
            log.close()

    if violations:
        logger.warning("%d invariant violation(s); first: %s", len(violations), violations[0])
    return RunResult(records=records, model=model, dirichlet=dirichlet, initial_dirichlet=initial,
                     profile=profile, violations=violations, log_path=log_path)


def write_snapshot(result: RunResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(result.model, result.dirichlet)))
    return path
