"""Generative model container, validation, and the prompt/search/info model builder.

Tensor conventions follow the usual discrete active-inference layout:

* ``A[m]`` has shape ``(num_obs[m], *[num_states[f] for f in A_deps[m]])``
* ``B[f]`` has shape ``(num_states[f], num_states[f], num_controls[f])`` and
  ``B[f][next, prev, u]`` is the transition probability.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .maths import NORM_TOL

MODEL_SCHEMA = "inferact-model/1"

PROMPT, SEARCH, INFO = 0, 1, 2
PROMPT_MODALITIES = (0, 1, 2)
SEARCH_MODALITIES = (3, 4, 5)
INFO_MODALITY = 6
MODALITY_NAMES = (
    "accuracy",
    "relevance",
    "comprehensiveness",
    "info_relevance",
    "info_usefulness",
    "source_quality",
    "info_state",
)
INFO_LEVEL_NAMES = ("no_info", "basic_info", "detailed_info")

DEFAULT_DIMS = {"prompts": 33, "searches": 11, "info_levels": 3, "quality_levels": 11}

LOW_QUALITY_PREF = -16.0
QUALITY_SCALE = 2.0
INFO_PREFS = (-32.0, 8.0, 64.0)
BASE_CONCENTRATION = 1.0
TRANSITION_BIAS = 0.1


@dataclass
class GenerativeModel:
    A: list
    B: list
    C: list
    D: list
    A_deps: list
    B_deps: list

    @property
    def num_modalities(self) -> int:
        return len(self.A)

    @property
    def num_factors(self) -> int:
        return len(self.B)

    @property
    def num_obs(self) -> list[int]:
        return [a.shape[0] for a in self.A]

    @property
    def num_states(self) -> list[int]:
        return [b.shape[0] for b in self.B]

    @property
    def num_controls(self) -> list[int]:
        return [b.shape[2] for b in self.B]

    def copy(self) -> "GenerativeModel":
        return GenerativeModel(
            A=[a.copy() for a in self.A],
            B=[b.copy() for b in self.B],
            C=[c.copy() for c in self.C],
            D=[d.copy() for d in self.D],
            A_deps=[list(d) for d in self.A_deps],
            B_deps=[list(d) for d in self.B_deps],
        )


@dataclass
class DirichletState:
    """Concentration parameters for ``A`` (``pA``) and ``B`` (``pB``).

    The learning masks are the support of the concentrations at construction
    time; updates never touch entries outside them.
    """

    pA: list
    pB: list
    mask_A: list = field(default=None)
    mask_B: list = field(default=None)

    def __post_init__(self):
        self.pA = [np.asarray(p, dtype=float) for p in self.pA]
        self.pB = [np.asarray(p, dtype=float) for p in self.pB]
        if self.mask_A is None:
            self.mask_A = [p > 0 for p in self.pA]
        if self.mask_B is None:
            self.mask_B = [p > 0 for p in self.pB]

    def replace(self, pA=None, pB=None) -> "DirichletState":
        return DirichletState(
            pA=self.pA if pA is None else pA,
            pB=self.pB if pB is None else pB,
            mask_A=self.mask_A,
            mask_B=self.mask_B,
        )

    def total_A(self) -> float:
        return float(sum(p.sum() for p in self.pA))


def _column_label(idx) -> str:
    idx = tuple(int(i) for i in idx)
    return str(idx[0]) if len(idx) == 1 else str(idx)


def _check_columns(tensor: np.ndarray, label: str, out: list[str]) -> None:
    if tensor.ndim < 2:
        out.append(f"{label}: expected at least 2 dimensions, got shape {tensor.shape}")
        return
    if not np.all(np.isfinite(tensor)):
        out.append(f"{label}: contains non-finite entries")
        return
    neg = np.argwhere(tensor < 0)
    for idx in neg:
        out.append(f"{label}: negative entry at {tuple(int(i) for i in idx)}")
    sums = tensor.sum(axis=0)
    bad = np.argwhere(np.abs(sums - 1.0) > NORM_TOL)
    for idx in bad:
        out.append(f"{label}: column {_column_label(idx)} sums to {float(sums[tuple(idx)]):.12g}")


def validate_model(model: GenerativeModel) -> list[str]:
    """Return every shape, normalisation, and dependency violation (empty = valid)."""
    out: list[str] = []
    nf, nm = len(model.B), len(model.A)
    if len(model.D) != nf:
        out.append(f"D has {len(model.D)} entries for {nf} factors")
    if len(model.B_deps) != nf:
        out.append(f"B_deps has {len(model.B_deps)} entries for {nf} factors")
    if len(model.C) != nm:
        out.append(f"C has {len(model.C)} entries for {nm} modalities")
    if len(model.A_deps) != nm:
        out.append(f"A_deps has {len(model.A_deps)} entries for {nm} modalities")
        return out

    num_states = []
    for f, b in enumerate(model.B):
        b = np.asarray(b)
        if b.ndim != 3 or b.shape[0] != b.shape[1]:
            out.append(f"B[{f}]: expected shape (n, n, u), got {b.shape}")
            num_states.append(b.shape[0] if b.ndim else 0)
            continue
        num_states.append(b.shape[0])
        _check_columns(b, f"B[{f}]", out)

    for f, deps in enumerate(model.B_deps[:nf]):
        if list(deps) != [f]:
            out.append(f"B_deps[{f}] = {list(deps)}: only self-dependent transitions are supported")

    for f, d in enumerate(model.D[:nf]):
        d = np.asarray(d, dtype=float)
        if f < len(num_states) and d.shape != (num_states[f],):
            out.append(f"D[{f}]: length {d.size} does not match {num_states[f]} states")
        if np.any(d < 0) or abs(d.sum() - 1.0) > NORM_TOL:
            out.append(f"D[{f}]: not a normalised distribution (sum {d.sum():.12g})")

    for m, (a, deps) in enumerate(zip(model.A, model.A_deps)):
        a = np.asarray(a)
        bad_deps = [f for f in deps if not 0 <= f < nf]
        if bad_deps:
            out.append(f"A_deps[{m}] references missing factor(s) {bad_deps} (model has {nf})")
            continue
        if len(set(deps)) != len(deps):
            out.append(f"A_deps[{m}] lists a factor twice: {list(deps)}")
        expected = tuple(num_states[f] for f in deps)
        if a.shape[1:] != expected:
            out.append(f"A[{m}]: state dimensions {a.shape[1:]} do not match factors {list(deps)} {expected}")
            continue
        _check_columns(a, f"A[{m}]", out)
        if m < len(model.C):
            c = np.asarray(model.C[m], dtype=float)
            if c.shape != (a.shape[0],):
                out.append(f"C[{m}]: length {c.size} does not match {a.shape[0]} observations")
            elif not np.all(np.isfinite(c)):
                out.append(f"C[{m}]: contains non-finite entries")
    return out


def quality_preferences(levels: int) -> np.ndarray:
    """-16 for the lowest level, then a quadratic ramp reaching 20 at the top."""
    top = levels - 1
    q = np.arange(levels, dtype=float)
    c = QUALITY_SCALE * (q / top) ** 2 * 10.0
    c[0] = LOW_QUALITY_PREF
    return c


def info_preferences(levels: int) -> np.ndarray:
    if levels == len(INFO_PREFS):
        return np.array(INFO_PREFS, dtype=float)
    return np.interp(np.linspace(0.0, 1.0, levels), [0.0, 0.5, 1.0], INFO_PREFS)


def _resolve_dims(dims: Optional[dict]) -> dict:
    out = dict(DEFAULT_DIMS)
    if dims:
        unknown = set(dims) - set(DEFAULT_DIMS)
        if unknown:
            raise ValueError(f"unknown dimension(s): {sorted(unknown)}")
        out.update(dims)
    for key, value in out.items():
        if int(value) != value or value < 2:
            raise ValueError(f"dimension {key!r} must be an integer >= 2, got {value!r}")
        out[key] = int(value)
    return out


def controlled_transitions(num_states: int, decay_to_zero: bool) -> np.ndarray:
    """Deterministic B for a factor set directly by its controls.

    Control ``u >= 1`` moves to state ``u - 1``. Control 0 either keeps the
    current state or sends every state to state 0.
    """
    b = np.zeros((num_states, num_states, num_states + 1))
    if decay_to_zero:
        b[0, :, 0] = 1.0
    else:
        b[:, :, 0] = np.eye(num_states)
    for u in range(1, num_states + 1):
        b[u - 1, :, u] = 1.0
    return b


def default_transition_concentrations(dims: dict) -> list[np.ndarray]:
    P, S, I = dims["prompts"], dims["searches"], dims["info_levels"]
    pB_prompt = np.full((P, P, P + 1), BASE_CONCENTRATION)
    pB_prompt[np.arange(P), np.arange(P), 0] += TRANSITION_BIAS
    pB_search = np.full((S, S, S + 1), BASE_CONCENTRATION)
    pB_search[0, :, 0] += TRANSITION_BIAS
    pB_info = np.full((I, I, 1), BASE_CONCENTRATION)
    for s in range(I):
        pB_info[min(s + 1, I - 1), s, 0] += TRANSITION_BIAS
    return [pB_prompt, pB_search, pB_info]


IDLE_MODES = ("soft", "biased", "deterministic")


def build_research_model(
    dims: Optional[dict] = None, idle: str = "soft"
) -> tuple[GenerativeModel, DirichletState]:
    """Build the three-factor, seven-modality research-agent model.

    Parameters
    ----------
    dims : dict, optional
        Any of ``prompts``, ``searches``, ``info_levels``, ``quality_levels``
        (each >= 2). Defaults are 33, 11, 3 and 11.
    idle : {"soft", "biased", "deterministic"}
        What control 0 (no action on a factor) means for the prompt and search
        factors. ``"soft"`` keeps the prompt exactly and moves the search
        factor along the normalised ``pB`` column, a weak pull towards state 0
        that leaves the agent unsure which search results are current.
        ``"biased"`` uses the normalised ``pB`` columns for both factors.
        ``"deterministic"`` keeps the prompt and resets the search state to 0.

    Returns
    -------
    (GenerativeModel, DirichletState)
        ``A`` is uniform (the normalised all-ones ``pA``), ``D`` is uniform, the
        prompt and search ``B`` tensors are deterministic, and the info ``B`` is
        the normalised, forward-biased ``pB``.
    """
    if idle not in IDLE_MODES:
        raise ValueError(f"idle must be one of {IDLE_MODES}, got {idle!r}")
    dims = _resolve_dims(dims)
    P, S, I, L = dims["prompts"], dims["searches"], dims["info_levels"], dims["quality_levels"]

    A_deps = [[PROMPT]] * 3 + [[SEARCH]] * 3 + [[INFO]]
    A_deps = [list(d) for d in A_deps]
    pA = [np.full((L, P), BASE_CONCENTRATION) for _ in PROMPT_MODALITIES]
    pA += [np.full((L, S), BASE_CONCENTRATION) for _ in SEARCH_MODALITIES]
    pA.append(np.full((I, I), BASE_CONCENTRATION))

    pB = default_transition_concentrations(dims)
    dirichlet = DirichletState(pA=pA, pB=pB)
    A, B_norm = normalize_dirichlet(dirichlet)

    B = [
        controlled_transitions(P, decay_to_zero=False),
        controlled_transitions(S, decay_to_zero=True),
        B_norm[INFO],
    ]
    if idle != "deterministic":
        B[SEARCH][:, :, 0] = B_norm[SEARCH][:, :, 0]
    if idle == "biased":
        B[PROMPT][:, :, 0] = B_norm[PROMPT][:, :, 0]
    C = [quality_preferences(L) for _ in range(6)] + [info_preferences(I)]
    D = [np.full(n, 1.0 / n) for n in (P, S, I)]
    model = GenerativeModel(A=A, B=B, C=C, D=D, A_deps=A_deps, B_deps=[[0], [1], [2]])
    return model, dirichlet


def _normalize_columns(p: np.ndarray, label: str) -> np.ndarray:
    totals = p.sum(axis=0)
    if np.any(totals <= 0):
        idx = _column_label(np.argwhere(totals <= 0)[0])
        raise ValueError(f"{label}: column {idx} has zero total concentration")
    return p / totals


def normalize_dirichlet(d: DirichletState) -> tuple[list, list]:
    """Dirichlet means: each column of ``pA``/``pB`` divided by its sum."""
    A = [_normalize_columns(p, f"pA[{m}]") for m, p in enumerate(d.pA)]
    B = [_normalize_columns(p, f"pB[{f}]") for f, p in enumerate(d.pB)]
    return A, B


def _pack(arr: np.ndarray, **extra) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), **extra, "data": arr.ravel(order="C").tolist()}


def _unpack(entry: dict) -> np.ndarray:
    shape = tuple(entry["shape"])
    data = np.asarray(entry["data"], dtype=float)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"tensor data has {data.size} values for shape {shape}")
    return data.reshape(shape)


def model_to_dict(model: GenerativeModel, dirichlet: Optional[DirichletState] = None) -> dict:
    doc = {
        "version": MODEL_SCHEMA,
        "A": [_pack(a, deps=list(deps)) for a, deps in zip(model.A, model.A_deps)],
        "B": [_pack(b, deps=list(deps)) for b, deps in zip(model.B, model.B_deps)],
        "C": [_pack(c) for c in model.C],
        "D": [_pack(d) for d in model.D],
    }
    if dirichlet is not None:
        doc["pA"] = [_pack(p) for p in dirichlet.pA]
        doc["pB"] = [_pack(p) for p in dirichlet.pB]
        doc["mask_A"] = [_pack(m) for m in dirichlet.mask_A]
        doc["mask_B"] = [_pack(m) for m in dirichlet.mask_B]
    return doc


def model_from_dict(doc: dict) -> tuple[GenerativeModel, Optional[DirichletState]]:
    if doc.get("version") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model document version {doc.get('version')!r}")
    model = GenerativeModel(
        A=[_unpack(e) for e in doc["A"]],
        B=[_unpack(e) for e in doc["B"]],
        C=[_unpack(e) for e in doc["C"]],
        D=[_unpack(e) for e in doc["D"]],
        A_deps=[list(e["deps"]) for e in doc["A"]],
        B_deps=[list(e["deps"]) for e in doc["B"]],
    )
    dirichlet = None
    if "pA" in doc:
        dirichlet = DirichletState(
            pA=[_unpack(e) for e in doc["pA"]],
            pB=[_unpack(e) for e in doc["pB"]],
            mask_A=[_unpack(e) > 0 for e in doc["mask_A"]] if "mask_A" in doc else None,
            mask_B=[_unpack(e) > 0 for e in doc["mask_B"]] if "mask_B" in doc else None,
        )
    return model, dirichlet


def matrix_csv(tensor: np.ndarray) -> str:
    """CSV text for one tensor: rows are observation index, columns flattened state index."""
    t = np.asarray(tensor, dtype=float)
    flat = t.reshape(t.shape[0], -1)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["obs"] + [str(j) for j in range(flat.shape[1])])
    for i, row in enumerate(flat):
        writer.writerow([i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_matrix_csv(tensor: np.ndarray, path) -> Path:
    path = Path(path)
    path.write_text(matrix_csv(tensor))
    return path
