"""Post-hoc exports and metrics computed from a run log.

Everything here is a pure function of the JSONL log. Learned likelihoods are
not stored per step; they are rebuilt by replaying the Dirichlet updates from
the header's configuration and each step's observation and beliefs.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .agent import LOG_SCHEMA, RunConfig, learning_config
from .control import action_alphabet
from .learning import update_likelihood, update_transitions
from .maths import entropy
from .model import MODALITY_NAMES, DirichletState, build_research_model, matrix_csv, normalize_dirichlet

EXPORT_KINDS = ("a_matrices", "efe_grid", "action_heatmap", "action_timeline")


class LogError(ValueError):
    """The log is missing, empty, or not an inferact run log."""


def read_log(path) -> tuple[dict, list[dict]]:
    """Header and step records of a run log."""
    path = Path(path)
    if not path.exists():
        raise LogError(f"{path}: no such log")
    header, steps = None, []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogError(f"{path}:{n}: not JSON ({exc})") from exc
        if doc.get("schema") != LOG_SCHEMA:
            raise LogError(f"{path}:{n}: unexpected schema {doc.get('schema')!r}")
        if doc.get("kind") == "header":
            header = doc
        else:
            steps.append(doc)
    if header is None:
        raise LogError(f"{path}: missing header line")
    if not steps:
        raise LogError(f"{path}: log has no steps")
    return header, steps


def _config(header: dict) -> RunConfig:
    return RunConfig.from_dict(header["config"])


def replay_dirichlet(header: dict, steps: Sequence[dict], upto: Optional[int] = None) -> list[DirichletState]:
    """Dirichlet states after 0, 1, ..., ``upto`` logged steps (default: all)."""
    cfg = _config(header)
    model, dirichlet = build_research_model(cfg.dims, idle=cfg.idle)
    lcfg = learning_config(cfg, model.num_factors)
    upto = len(steps) if upto is None else upto
    states = [dirichlet]
    q_prev = prev_action = None
    for rec in steps[:upto]:
        q = [np.asarray(b, dtype=float) for b in rec["beliefs"]]
        dirichlet = update_likelihood(dirichlet, rec["observation"], q, lcfg, model.A_deps)
        if q_prev is not None:
            dirichlet = update_transitions(dirichlet, q_prev, q, prev_action, lcfg)
        states.append(dirichlet)
        q_prev, prev_action = q, rec["action"]
    return states


def _check_step(step: int, n: int) -> None:
    if not 0 <= step <= n:
        raise LogError(f"step {step} is outside 0..{n}")


def a_matrices(header: dict, steps: Sequence[dict], step: int) -> list[np.ndarray]:
    """Normalised learned likelihoods after ``step`` updates (0 = the uniform start)."""
    _check_step(step, len(steps))
    A, _ = normalize_dirichlet(replay_dirichlet(header, steps, step)[-1])
    return A


def efe_grid(header: dict, step_record: dict) -> list[list[Optional[float]]]:
    """(1 + prompts) x (1 + searches) grid of single-action policy scores.

    Row 0 / column 0 is "no prompt" / "no search". Cells combining a prompt
    with a search are illegal actions and are ``None``.
    """
    cfg = _config(header)
    grid: list[list[Optional[float]]] = [[None] * (cfg.searches + 1) for _ in range(cfg.prompts + 1)]
    for (p, s, _), g in zip(action_alphabet(cfg.prompts, cfg.searches), step_record["action_G"]):
        grid[p][s] = float(g)
    return grid


def action_heatmap(header: dict, steps: Sequence[dict]) -> np.ndarray:
    """Counts of each (prompt control, search control) pair; no-action is left out."""
    cfg = _config(header)
    counts = np.zeros((cfg.prompts + 1, cfg.searches + 1), dtype=int)
    for rec in steps:
        p, s, _ = rec["action"]
        if p or s:
            counts[p, s] += 1
    return counts


def action_timeline(header: dict, steps: Sequence[dict]) -> list[dict]:
    """One row per step: index, action type and the action's alphabet position."""
    cfg = _config(header)
    ids = {a: i for i, a in enumerate(action_alphabet(cfg.prompts, cfg.searches))}
    return [
        {"step": rec["step"], "type": rec["action_type"], "action_id": ids[tuple(rec["action"])]}
        for rec in steps
    ]


def _quartiles(n: int) -> list[slice]:
    edges = [round(i * n / 4) for i in range(5)]
    return [slice(edges[i], edges[i + 1]) for i in range(4)]


def column_entropy(A: np.ndarray, columns: Optional[Iterable[int]] = None) -> float:
    """Mean entropy of the columns of a 2-D likelihood (optionally a subset)."""
    flat = A.reshape(A.shape[0], -1)
    cols = range(flat.shape[1]) if columns is None else list(columns)
    return float(np.mean([entropy(flat[:, j]) for j in cols]))


def transition_step(steps: Sequence[dict], window: int = 10) -> Optional[int]:
    """First step closing a ``window``-long span where prompt actions outnumber searches."""
    kinds = [rec["action_type"] for rec in steps]
    width = min(window, len(kinds))
    for end in range(width, len(kinds) + 1):
        span = kinds[end - width:end]
        if span.count("prompt") > span.count("search"):
            return steps[end - 1]["step"]
    return None


def analyze(header: dict, steps: Sequence[dict]) -> dict:
    """Quartile action mix, observed quality, entropy trajectories and the transition step."""
    if not steps:
        raise LogError("log has no steps")
    quarters = _quartiles(len(steps))
    search_fraction, prompt_quality, search_quality = [], [], []
    for q in quarters:
        part = steps[q]
        if not part:
            search_fraction.append(None)
            prompt_quality.append(None)
            search_quality.append(None)
            continue
        search_fraction.append(sum(r["action_type"] == "search" for r in part) / len(part))
        obs = np.array([r["observation"] for r in part], dtype=float)
        prompt_quality.append(float(obs[:, 0:3].mean()))
        search_quality.append(float(obs[:, 3:6].mean()))
    states = replay_dirichlet(header, steps)
    trajectories = {name: [] for name in MODALITY_NAMES}
    for d in states:
        A, _ = normalize_dirichlet(d)
        for name, a in zip(MODALITY_NAMES, A):
            trajectories[name].append(column_entropy(a))
    step = transition_step(steps)
    return {
        "steps": len(steps),
        "search_fraction_by_quartile": search_fraction,
        "mean_prompt_quality_by_quartile": prompt_quality,
        "mean_search_quality_by_quartile": search_quality,
        "column_entropy": trajectories,
        "transition_step": "none" if step is None else step,
    }


def _write_table(path: Path, rows: list[list], fmt: str, header: list[str]) -> Path:
    if fmt == "json":
        path.write_text(json.dumps({"columns": header, "rows": rows}, indent=1) + "\n")
        return path
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    path.write_text(buf.getvalue())
    return path


def export(log_path, kind: str, out_dir, steps_sel: Optional[Sequence[int]] = None, fmt: str = "csv") -> list[Path]:
    """Write one export kind for a log and return the files produced.

    ``steps_sel`` picks steps for ``a_matrices`` (update counts, default the
    final state) and ``efe_grid`` (step indices, default the last step).
    """
    if kind not in EXPORT_KINDS:
        raise LogError(f"unknown export kind {kind!r}; expected one of {', '.join(EXPORT_KINDS)}")
    if fmt not in ("csv", "json"):
        raise LogError(f"unknown format {fmt!r}")
    header, steps = read_log(log_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "." + fmt
    written: list[Path] = []

    if kind == "a_matrices":
        selected = [len(steps)] if not steps_sel else list(steps_sel)
        for s in selected:
            _check_step(s, len(steps))
        states = replay_dirichlet(header, steps, max(selected))
        for s in selected:
            A, _ = normalize_dirichlet(states[s])
            for name, a in zip(MODALITY_NAMES, A):
                path = out_dir / f"A_{name}_step{s}{ext}"
                if fmt == "csv":
                    path.write_text(matrix_csv(a))
                else:
                    path.write_text(json.dumps({"modality": name, "step": s, "matrix": a.tolist()}) + "\n")
                written.append(path)
    elif kind == "efe_grid":
        selected = [len(steps) - 1] if not steps_sel else list(steps_sel)
        for s in selected:
            if not 0 <= s < len(steps):
                raise LogError(f"step {s} is outside 0..{len(steps) - 1}")
            grid = efe_grid(header, steps[s])
            cols = ["prompt"] + [f"search_{j}" for j in range(len(grid[0]))]
            rows = [[i] + row for i, row in enumerate(grid)]
            written.append(_write_table(out_dir / f"efe_grid_step{s}{ext}", rows, fmt, cols))
    elif kind == "action_heatmap":
        counts = action_heatmap(header, steps)
        cols = ["prompt"] + [f"search_{j}" for j in range(counts.shape[1])]
        rows = [[i] + [int(c) for c in row] for i, row in enumerate(counts)]
        written.append(_write_table(out_dir / f"action_heatmap{ext}", rows, fmt, cols))
    else:
        rows = [[r["step"], r["type"], r["action_id"]] for r in action_timeline(header, steps)]
        written.append(_write_table(out_dir / f"action_timeline{ext}", rows, fmt, ["step", "type", "action_id"]))
    return written
