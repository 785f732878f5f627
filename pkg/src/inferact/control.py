"""Policy enumeration, expected free energy scoring, and action selection.

Scores follow a "higher is better" convention::

    G = state_info_gain + pragmatic_value + param_info_gain

where ``state_info_gain + pragmatic_value == -(risk + ambiguity)``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .inference import predict_states
from .maths import joint, log_softmax, log_stable, softmax
from .model import DirichletState, GenerativeModel

Action = tuple  # (prompt_ctrl, search_ctrl, info_ctrl)
Policy = tuple  # tuple of Action, one per future timestep

MODES = ("cartesian", "repeated")


class PolicyError(ValueError):
    pass


def action_alphabet(num_prompts: int, num_searches: int) -> list[Action]:
    """No-action, then prompt-only actions, then search-only actions."""
    return (
        [(0, 0, 0)]
        + [(p, 0, 0) for p in range(1, num_prompts + 1)]
        + [(0, s, 0) for s in range(1, num_searches + 1)]
    )


def check_action(action: Sequence[int]) -> None:
    if len(action) != 3:
        raise PolicyError(f"action must have 3 controls, got {tuple(action)}")
    p, s, i = action
    if i != 0:
        raise PolicyError(f"info factor is not controllable: {tuple(action)}")
    if p > 0 and s > 0:
        raise PolicyError(f"prompt and search cannot act together: {tuple(action)}")
    if p < 0 or s < 0:
        raise PolicyError(f"negative control in {tuple(action)}")


def action_kind(action: Sequence[int]) -> str:
    if action[0] > 0:
        return "prompt"
    if action[1] > 0:
        return "search"
    return "none"


def enumerate_policies(num_prompts: int, num_searches: int, horizon: int, mode: str = "cartesian") -> list[Policy]:
    """All legal policies of length ``horizon``.

    ``cartesian`` takes every sequence over the action alphabet ((1+P+S)**H
    policies); ``repeated`` holds one action for the whole horizon (1+P+S).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown policy mode {mode!r}")
    actions = action_alphabet(num_prompts, num_searches)
    if mode == "repeated":
        return [(a,) * horizon for a in actions]
    return list(itertools.product(actions, repeat=horizon))


@dataclass
class EFEBreakdown:
    state_info_gain: float
    pragmatic_value: float
    param_info_gain: float
    risk: float
    ambiguity: float
    G: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PolicyPosterior:
    policies: list
    probs: np.ndarray
    habits: np.ndarray
    G: np.ndarray


def expected_utility(pred_obs: Sequence[Sequence[np.ndarray]], C: Sequence[np.ndarray]) -> float:
    """Sum over timesteps and modalities of ``q(o) . ln softmax(C_m)``.

    ``pred_obs[t][m]`` is the predicted observation distribution.
    """
    ln_pref = [log_softmax(c) for c in C]
    total = 0.0
    for t, step in enumerate(pred_obs):
        if len(step) != len(C):
            raise ValueError(f"timestep {t}: {len(step)} modalities but {len(C)} preference vectors")
        for m, qo in enumerate(step):
            qo = np.asarray(qo, dtype=float)
            if qo.shape != ln_pref[m].shape:
                raise ValueError(f"timestep {t}, modality {m}: shape {qo.shape} vs {ln_pref[m].shape}")
            total += float(qo @ ln_pref[m])
    return total


def _flat_A(model: GenerativeModel) -> list[np.ndarray]:
    return [np.ascontiguousarray(a.reshape(a.shape[0], -1), dtype=float) for a in model.A]


def _joint_flat(q: Sequence[np.ndarray], deps: Sequence[int]) -> np.ndarray:
    if len(deps) == 1:
        return np.ascontiguousarray(q[deps[0]], dtype=float)
    return np.ascontiguousarray(joint([q[f] for f in deps]).ravel())


def _zero_pref(model: GenerativeModel) -> list[np.ndarray]:
    return [np.full(n, -np.log(n)) for n in model.num_obs]


def state_info_gain(model: GenerativeModel, q_states: Sequence[np.ndarray]) -> float:
    """Expected KL between the Bayes posterior and the predicted states, summed over modalities.

    For every modality each observation level is enumerated, the posterior over
    the modality's dependency states is formed, and its KL from the prediction
    is weighted by the predicted probability of that level. Non-negative.
    """
    total = 0.0
    for A2, deps, ln_pref in zip(_flat_A(model), model.A_deps, _zero_pref(model)):
        total += kernels.modality_terms(A2, _joint_flat(q_states, deps), ln_pref, None)[1]
    return max(total, 0.0)


def risk_and_ambiguity(
    model: GenerativeModel, q_states: Sequence[np.ndarray], C: Optional[Sequence[np.ndarray]] = None
) -> tuple[float, float]:
    """``KL(q(o) || softmax(C))`` and ``E_q(s) H[p(o|s)]``, each summed over modalities."""
    C = model.C if C is None else C
    risk = ambiguity = 0.0
    for A2, deps, c in zip(_flat_A(model), model.A_deps, C):
        _, _, _, r, a, _ = kernels.modality_terms(A2, _joint_flat(q_states, deps), log_softmax(c), None)
        risk += r
        ambiguity += a
    return max(risk, 0.0), max(ambiguity, 0.0)


def novelty_weights(dirichlet: DirichletState) -> list[np.ndarray]:
    """``0.5 * (1/column_sum - 1/pA)`` on the learning mask, zero elsewhere; flattened to 2-D."""
    out = []
    for pA, mask in zip(dirichlet.pA, dirichlet.mask_A):
        flat = pA.reshape(pA.shape[0], -1)
        m = mask.reshape(flat.shape) & (flat > 0)
        col = flat.sum(axis=0, keepdims=True)
        w = np.zeros_like(flat)
        with np.errstate(divide="ignore"):
            w[m] = 0.5 * (np.broadcast_to(1.0 / col, flat.shape)[m] - 1.0 / flat[m])
        out.append(np.ascontiguousarray(w))
    return out


def param_info_gain(
    dirichlet: DirichletState,
    q_states: Sequence[np.ndarray],
    A_deps: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[list] = None,
) -> float:
    """Expected novelty of the likelihood concentrations under predicted states.

    ``-sum_o q(o) (W q(s))[o]`` per modality, with ``q(o)`` the predictive from
    the Dirichlet mean. Decays towards zero as concentrations grow.
    """
    if A_deps is None:
        A_deps = [list(range(p.ndim - 1)) for p in dirichlet.pA]
    W = novelty_weights(dirichlet) if weights is None else weights
    total = 0.0
    for pA, deps, w in zip(dirichlet.pA, A_deps, W):
        flat = pA.reshape(pA.shape[0], -1)
        A2 = np.ascontiguousarray(flat / flat.sum(axis=0, keepdims=True))
        total += kernels.modality_terms(A2, _joint_flat(q_states, deps), np.zeros(A2.shape[0]), w)[5]
    return max(total, 0.0)


class PolicyScorer:
    """Scores policies against a fixed model, Dirichlet state and current beliefs.

    Per-step terms are memoised on the action prefix, so policies sharing a
    prefix are rolled forward once.
    """

    def __init__(
        self,
        model: GenerativeModel,
        dirichlet: Optional[DirichletState],
        beliefs: Sequence[np.ndarray],
        use_state_info_gain: bool = True,
        use_utility: bool = True,
        use_param_info_gain: bool = True,
        kernel=None,
    ):
        self.model = model
        self.beliefs = [np.asarray(b, dtype=float) for b in beliefs]
        self.kernel = kernel or kernels.modality_terms
        self.flags = (use_state_info_gain, use_utility, use_param_info_gain)
        self.A2 = _flat_A(model)
        self.ln_pref = [log_softmax(c) for c in model.C]
        self.W = novelty_weights(dirichlet) if (dirichlet is not None and use_param_info_gain) else None
        self._cache: dict = {}

    def _step(self, q):
        sig = eu = pig = risk = amb = 0.0
        for m, deps in enumerate(self.model.A_deps):
            w = None if self.W is None else self.W[m]
            _, ig, u, r, a, nov = self.kernel(self.A2[m], _joint_flat(q, deps), self.ln_pref[m], w)
            sig += ig
            eu += u
            pig += nov
            risk += r
            amb += a
        return sig, eu, pig, risk, amb

    def _rollout(self, prefix: tuple):
        hit = self._cache.get(prefix)
        if hit is not None:
            return hit
        q_prev = self.beliefs if len(prefix) == 1 else self._rollout(prefix[:-1])[0]
        q = predict_states(self.model, q_prev, prefix[-1])
        out = (q, self._step(q))
        self._cache[prefix] = out
        return out

    def score(self, policy: Policy) -> EFEBreakdown:
        totals = np.zeros(5)
        for t in range(len(policy)):
            totals += self._rollout(tuple(tuple(a) for a in policy[: t + 1]))[1]
        sig, eu, pig, risk, amb = (float(x) for x in totals)
        use_sig, use_eu, use_pig = self.flags
        G = (sig if use_sig else 0.0) + (eu if use_eu else 0.0) + (pig if use_pig else 0.0)
        return EFEBreakdown(
            state_info_gain=sig, pragmatic_value=eu, param_info_gain=pig if use_pig else 0.0,
            risk=risk, ambiguity=amb, G=G,
        )


def score_policies(
    model: GenerativeModel,
    dirichlet: Optional[DirichletState],
    beliefs: Sequence[np.ndarray],
    policies: Sequence[Policy],
    **options,
) -> list[EFEBreakdown]:
    """Roll beliefs forward under each policy and return its EFE breakdown (policy order kept)."""
    scorer = PolicyScorer(model, dirichlet, beliefs, **options)
    return [scorer.score(pi) for pi in policies]


def policy_posterior(
    scores,
    gamma: float,
    habits: Optional[np.ndarray] = None,
    policies: Optional[list] = None,
) -> PolicyPosterior:
    """``softmax(gamma * G + ln E)`` where ``E = softmax(habits)`` (uniform by default)."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    G = np.array([s.G if isinstance(s, EFEBreakdown) else float(s) for s in scores], dtype=float)
    habits = np.zeros(G.size) if habits is None else np.asarray(habits, dtype=float)
    if habits.shape != G.shape:
        raise ValueError(f"habits length {habits.size} does not match {G.size} policies")
    if policies is not None and len(policies) != G.size:
        raise ValueError(f"{len(policies)} policies for {G.size} scores")
    probs = softmax(gamma * G + log_softmax(habits))
    return PolicyPosterior(policies=list(policies) if policies is not None else None,
                           probs=probs, habits=habits, G=G)


def first_action_marginal(posterior: PolicyPosterior) -> tuple[list[Action], np.ndarray]:
    actions: list = []
    index: dict = {}
    mass: list = []
    for pi, p in zip(posterior.policies, posterior.probs):
        a = tuple(pi[0])
        if a not in index:
            index[a] = len(actions)
            actions.append(a)
            mass.append(0.0)
        mass[index[a]] += float(p)
    return actions, np.asarray(mass)


def select_action(
    posterior: PolicyPosterior,
    alpha: float = 16.0,
    mode: str = "deterministic",
    rng: Optional[np.random.Generator] = None,
) -> Action:
    """First action of the chosen policy.

    ``deterministic`` takes the most probable policy (lowest index on ties);
    ``stochastic`` samples a first action from ``softmax(alpha * ln marginal)``.
    """
    if posterior.policies is None:
        raise ValueError("posterior carries no policies")
    if mode == "deterministic":
        return tuple(posterior.policies[int(np.argmax(posterior.probs))][0])
    if mode != "stochastic":
        raise ValueError(f"unknown selection mode {mode!r}")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    rng = np.random.default_rng() if rng is None else rng
    actions, marginal = first_action_marginal(posterior)
    p = softmax(alpha * log_stable(marginal))
    return actions[int(rng.choice(len(actions), p=p))]
