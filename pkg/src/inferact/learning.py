"""Dirichlet concentration updates for the likelihood and transition tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .maths import joint
from .model import DirichletState, INFO


@dataclass
class LearningConfig:
    """Learning rate and which tensors are updated.

    ``modality_mask`` / ``factor_mask`` are per-index booleans; ``None`` means
    every modality, and only the info factor for transitions.
    """

    eta: float = 50.0
    learn_A: bool = True
    learn_B: bool = True
    modality_mask: Optional[Sequence[bool]] = None
    factor_mask: Optional[Sequence[bool]] = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta!r}")

    def modalities(self, n: int) -> list[bool]:
        if not self.learn_A:
            return [False] * n
        return [True] * n if self.modality_mask is None else [bool(x) for x in self.modality_mask]

    def factors(self, n: int) -> list[bool]:
        if not self.learn_B:
            return [False] * n
        if self.factor_mask is None:
            return [f == INFO for f in range(n)]
        return [bool(x) for x in self.factor_mask]


def update_likelihood(
    dirichlet: DirichletState,
    obs: Sequence[int],
    q: Sequence[np.ndarray],
    cfg: LearningConfig,
    A_deps: Sequence[Sequence[int]],
) -> DirichletState:
    """``pA_m += eta * (onehot(o_m) ⊗ q(s_deps)) ⊙ mask`` for each enabled modality.

    Returns a new state; ``dirichlet`` is not modified.
    """
    enabled = cfg.modalities(len(dirichlet.pA))
    pA = []
    for m, (p, mask, deps) in enumerate(zip(dirichlet.pA, dirichlet.mask_A, A_deps)):
        if not enabled[m]:
            pA.append(p)
            continue
        o = obs[m]
        if int(o) != o or not 0 <= o < p.shape[0]:
            raise ValueError(f"observation index {o!r} out of range for modality {m}")
        new = p.copy()
        new[int(o)] += cfg.eta * joint([q[f] for f in deps]) * mask[int(o)]
        pA.append(new)
    return dirichlet.replace(pA=pA)


def update_transitions(
    dirichlet: DirichletState,
    q_prev: Sequence[np.ndarray],
    q_post: Sequence[np.ndarray],
    controls: Sequence[int],
    cfg: LearningConfig,
) -> DirichletState:
    """``pB_f[:, :, u_f] += eta * (q_post ⊗ q_prev) ⊙ mask`` for each enabled factor."""
    enabled = cfg.factors(len(dirichlet.pB))
    for f, p in enumerate(dirichlet.pB):
        if not 0 <= controls[f] < p.shape[2]:
            raise ValueError(f"control {controls[f]} out of range for factor {f} ({p.shape[2]} controls)")
    if not any(enabled):
        return dirichlet
    pB = []
    for f, (p, mask) in enumerate(zip(dirichlet.pB, dirichlet.mask_B)):
        u = controls[f]
        if not enabled[f]:
            pB.append(p)
            continue
        new = p.copy()
        new[:, :, u] += cfg.eta * np.outer(q_post[f], q_prev[f]) * mask[:, :, u]
        pB.append(new)
    return dirichlet.replace(pB=pB)
