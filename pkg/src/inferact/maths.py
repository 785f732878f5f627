"""Categorical probability utilities shared by every other module.

All functions are pure and operate on 1-D ``numpy`` arrays (or lists of them).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

EPS = 1e-16
NORM_TOL = 1e-9
DRIFT_TOL = 1e-6


def log_stable(x):
    """Natural log with the argument clamped at ``EPS``."""
    return np.log(np.maximum(x, EPS))


def _as_finite_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def softmax(values) -> np.ndarray:
    """Normalised exponential with max-subtraction.

    Raises ``ValueError`` on empty input or non-finite entries.
    """
    x = _as_finite_vector(values)
    e = np.exp(x - x.max())
    return e / e.sum()


def log_softmax(values) -> np.ndarray:
    x = _as_finite_vector(values)
    shifted = x - x.max()
    return shifted - np.log(np.exp(shifted).sum())


def check_distribution(p, name: str = "distribution") -> np.ndarray:
    """Validate ``p`` as a categorical distribution and return it as floats.

    Small drift (<= ``DRIFT_TOL``) is renormalised away; anything larger is an error.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} has negative or non-finite entries")
    total = arr.sum()
    if abs(total - 1.0) > DRIFT_TOL:
        raise ValueError(f"{name} sums to {total!r}, not 1")
    if abs(total - 1.0) > NORM_TOL:
        arr = arr / total
    return arr


def renormalize(p) -> np.ndarray:
    """Divide by the sum when drift exceeds ``NORM_TOL``; error above ``DRIFT_TOL``."""
    return check_distribution(p)


def kl_divergence(q, p) -> float:
    """KL(q || p) in nats. Requires p > 0 wherever q > 0."""
    q = check_distribution(q, "q")
    p = check_distribution(p, "p")
    if q.shape != p.shape:
        raise ValueError(f"length mismatch: {q.size} vs {p.size}")
    support = q > 0
    if np.any(p[support] <= 0):
        raise ValueError("q is not absolutely continuous with respect to p")
    qs = q[support]
    return max(float(np.sum(qs * (np.log(qs) - np.log(p[support])))), 0.0)


def entropy(p) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    p = check_distribution(p)
    nz = p[p > 0]
    return max(float(-np.sum(nz * np.log(nz))), 0.0)


def outer_product(o, factor_posteriors: Sequence) -> np.ndarray:
    """Tensor product ``o ⊗ q(s_1) ⊗ ... ⊗ q(s_k)``.

    Output shape is ``(len(o), len(q1), ..., len(qk))``.
    """
    if len(factor_posteriors) == 0:
        raise ValueError("at least one factor posterior is required")
    out = check_distribution(o, "o")
    for i, q in enumerate(factor_posteriors):
        out = np.multiply.outer(out, check_distribution(q, f"factor {i}"))
    return out


def joint(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of factor marginals (no validation, any number of factors)."""
    out = np.asarray(factors[0], dtype=float)
    for q in factors[1:]:
        out = np.multiply.outer(out, q)
    return out


def sample_categorical(p, rng: np.random.Generator) -> int:
    """Draw one index from ``p`` using ``rng``."""
    p = check_distribution(p)
    return int(rng.choice(p.size, p=p))
