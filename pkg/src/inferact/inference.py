"""State estimation by fixed-point iteration, free energy, and forward prediction."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from .maths import joint, log_stable, renormalize, softmax
from .model import GenerativeModel

logger = logging.getLogger(__name__)

DEFAULT_ITERS = 10
DEFAULT_TOL = 1e-6


def check_observation(model: GenerativeModel, obs: Sequence[int]) -> list[int]:
    if len(obs) != model.num_modalities:
        raise ValueError(f"observation has {len(obs)} entries for {model.num_modalities} modalities")
    out = []
    for m, (o, n) in enumerate(zip(obs, model.num_obs)):
        if int(o) != o or not 0 <= o < n:
            raise ValueError(f"observation index {o!r} out of range for modality {m} ({n} levels)")
        out.append(int(o))
    return out


def _contract_except(tensor: np.ndarray, deps: Sequence[int], q: Sequence[np.ndarray], keep: int) -> np.ndarray:
    """Sum ``tensor`` against ``q`` over every dependency axis except factor ``keep``."""
    out = tensor
    for axis in range(len(deps) - 1, -1, -1):
        if deps[axis] != keep:
            out = np.tensordot(out, q[deps[axis]], axes=([axis], [0]))
    return out


def infer_states(
    model: GenerativeModel,
    prior: Sequence[np.ndarray],
    obs: Sequence[int],
    iters: int = DEFAULT_ITERS,
    tol: float = DEFAULT_TOL,
) -> list[np.ndarray]:
    """Mean-field posterior over each state factor given one observation.

    Each sweep sets ``q(s_f) = softmax(sum_m E_{q(s_-f)}[ln A_m[o_m]] + ln prior_f)``
    using the latest beliefs about the other factors. Iteration stops after
    ``iters`` sweeps or once no belief entry moves by more than ``tol``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    obs = check_observation(model, obs)
    ln_lik = []
    for m, (a, o) in enumerate(zip(model.A, obs)):
        row = a[o]
        if not np.any(row > 0):
            logger.warning("modality %d: observation %d has zero likelihood under every state; "
                           "falling back to the prior for its factors", m, o)
        ln_lik.append(log_stable(row))
    ln_prior = [log_stable(p) for p in prior]
    q = [np.asarray(p, dtype=float).copy() for p in prior]
    touches = [[m for m, deps in enumerate(model.A_deps) if f in deps] for f in range(model.num_factors)]

    for _ in range(iters):
        change = 0.0
        for f in range(model.num_factors):
            acc = ln_prior[f].copy()
            for m in touches[f]:
                acc += _contract_except(ln_lik[m], model.A_deps[m], q, f)
            new = softmax(acc)
            change = max(change, float(np.max(np.abs(new - q[f]))))
            q[f] = new
        if change < tol:
            break
    return q


def expected_log_likelihood(model: GenerativeModel, q: Sequence[np.ndarray], obs: Sequence[int]) -> float:
    total = 0.0
    for a, deps, o in zip(model.A, model.A_deps, obs):
        total += float(np.sum(log_stable(a[o]) * joint([q[f] for f in deps])))
    return total


def compute_vfe(
    model: GenerativeModel,
    q: Sequence[np.ndarray],
    obs: Sequence[int],
    prior: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Variational free energy ``KL(q || prior) - E_q[ln p(o | s)]``.

    ``prior`` defaults to ``model.D``.
    """
    obs = check_observation(model, obs)
    prior = model.D if prior is None else prior
    complexity = 0.0
    for qf, pf in zip(q, prior):
        qf = np.asarray(qf, dtype=float)
        nz = qf > 0
        complexity += float(np.sum(qf[nz] * (np.log(qf[nz]) - log_stable(np.asarray(pf)[nz]))))
    return complexity - expected_log_likelihood(model, q, obs)


def log_evidence(model: GenerativeModel, prior: Sequence[np.ndarray], obs: Sequence[int]) -> float:
    """Brute-force ``ln p(o)`` by summing the joint over every hidden-state configuration."""
    obs = check_observation(model, obs)
    p_s = joint(list(prior))
    lik = np.ones_like(p_s)
    nf = model.num_factors
    for a, deps, o in zip(model.A, model.A_deps, obs):
        row = a[o]
        # broadcast the modality's row over the full joint state space
        shape = [1] * nf
        for f in deps:
            shape[f] = model.num_states[f]
        order = np.argsort(deps)
        lik = lik * np.transpose(row, order).reshape(shape)
    return float(np.log(np.sum(lik * p_s)))


def predict_states(model: GenerativeModel, q: Sequence[np.ndarray], controls: Sequence[int]) -> list[np.ndarray]:
    """One-step prediction ``q'_f = B_f[:, :, u_f] q_f`` for every factor."""
    if len(controls) != model.num_factors:
        raise ValueError(f"expected {model.num_factors} controls, got {len(controls)}")
    out = []
    for f, (b, u) in enumerate(zip(model.B, controls)):
        if not 0 <= u < b.shape[2]:
            raise ValueError(f"control {u} out of range for factor {f} ({b.shape[2]} controls)")
        out.append(renormalize(b[:, :, u] @ q[f]))
    return out


def predict_observations(model: GenerativeModel, q: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Predicted observation marginal for each modality."""
    out = []
    for a, deps in zip(model.A, model.A_deps):
        qs = joint([q[f] for f in deps]).ravel()
        out.append(renormalize(a.reshape(a.shape[0], -1) @ qs))
    return out
