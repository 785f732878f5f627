"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear in
the "acceptance criteria" section at the end of the session.
"""

import collections
import itertools
import json
import time

import numpy as np
import pytest

from conftest import random_column_stochastic, record_acceptance, toy_model
from inferact.agent import RunConfig, run_experiment
from inferact.control import check_action, enumerate_policies, score_policies
from inferact.inference import compute_vfe, infer_states, log_evidence
from inferact.learning import LearningConfig, update_likelihood
from inferact.maths import entropy
from inferact.model import DirichletState, normalize_dirichlet

DESK = dict(prompts=5, searches=3, info_levels=3, eta=50.0, gamma=8.0, alpha=16.0, horizon=2,
            policy_mode="repeated", num_good=1, steps=100)
DESK_SEEDS = range(10)


@pytest.fixture(scope="module")
def desk_runs():
    start = time.perf_counter()
    runs = [run_experiment(RunConfig(**DESK, seed=s)) for s in DESK_SEEDS]
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def full_run():
    start = time.perf_counter()
    result = run_experiment(RunConfig(steps=100, seed=0))
    return result, time.perf_counter() - start


def test_criterion_1_dual_form_identity():
    start = time.perf_counter()
    worst, n_models, n_policies = 0.0, 0, 0
    rng = np.random.default_rng(2024)
    while n_models < 120:
        sizes = [int(rng.integers(2, 5)), int(rng.integers(2, 5))]
        A = [random_column_stochastic(rng, (int(rng.integers(2, 5)), *sizes), rng.uniform(0.2, 3.0)),
             random_column_stochastic(rng, (int(rng.integers(2, 5)), sizes[1]), rng.uniform(0.2, 3.0))]
        B = [random_column_stochastic(rng, (n, n, 2)) for n in sizes]
        C = [rng.normal(0.0, 5.0, size=a.shape[0]) for a in A]
        model = toy_model(A, B=B, C=C, A_deps=[[0, 1], [1]])
        q = [rng.dirichlet(np.ones(n)) for n in sizes]
        policies = list(itertools.product([(0, 0), (0, 1), (1, 0), (1, 1)], repeat=2))
        for s in score_policies(model, None, q, policies, use_param_info_gain=False):
            worst = max(worst, abs((s.state_info_gain + s.pragmatic_value) + (s.risk + s.ambiguity)))
            n_policies += 1
        n_models += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 5.0
    record_acceptance(1, ok, f"{n_models} models / {n_policies} policies, max |residual| {worst:.2e} "
                             f"(tol 1e-8), {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_criterion_2_exact_inference():
    rng = np.random.default_rng(7)
    worst_q = worst_f = 0.0
    cases = 0
    for n in range(1, 6):
        for k in range(1, 6):
            for _ in range(40):
                A = random_column_stochastic(rng, (k, n), rng.uniform(0.1, 3.0))
                prior = rng.dirichlet(np.ones(n))
                model = toy_model([A], D=[prior])
                for o in range(k):
                    q = infer_states(model, [prior], [o])
                    exact = A[o] * prior / (A[o] @ prior)
                    worst_q = max(worst_q, float(np.max(np.abs(q[0] - exact))))
                    f = compute_vfe(model, q, [o], [prior])
                    worst_f = max(worst_f, abs(f + log_evidence(model, [prior], [o])))
                    cases += 1
    ok = worst_q <= 1e-10 and worst_f <= 1e-10
    record_acceptance(2, ok, f"{cases} cases, max posterior error {worst_q:.2e}, "
                             f"max |F + ln p(o)| {worst_f:.2e} (tol 1e-10)")
    assert ok


def test_criterion_3_learning_is_counting():
    rng = np.random.default_rng(11)
    n_obs, n_states = 6, 4
    d = DirichletState(pA=[np.ones((n_obs, n_states))], pB=[np.ones((n_states, n_states, 1))])
    cfg = LearningConfig(eta=1.0)
    counts = collections.Counter()
    for _ in range(200):
        s, o = int(rng.integers(n_states)), int(rng.integers(n_obs))
        d = update_likelihood(d, [o], [np.eye(n_states)[s]], cfg, [[0]])
        counts[(o, s)] += 1
    A = normalize_dirichlet(d)[0][0]
    oracle = np.zeros((n_obs, n_states))
    for s in range(n_states):
        total = sum(counts[(o, s)] for o in range(n_obs))
        for o in range(n_obs):
            oracle[o, s] = (1 + counts[(o, s)]) / (n_obs + total)
    ok = bool(np.array_equal(A, oracle))
    record_acceptance(3, ok, f"200 observations, learned columns {'equal' if ok else 'differ from'} "
                             f"(1 + counts) / (card + total) exactly")
    assert ok


def _desk_summary(result):
    kinds = [r.action_type for r in result.records]
    first = sum(k == "search" for k in kinds[:25]) / 25
    last = sum(k == "search" for k in kinds[75:]) / 25
    prompts = collections.Counter(r.action[0] for r in result.records[75:] if r.action[0] > 0)
    majority = prompts.most_common(1)[0][0] if prompts else None
    return first, last, majority


def test_criterion_4_exploration_then_exploitation(desk_runs):
    runs, elapsed = desk_runs
    details, hits = [], 0
    for seed, result in zip(DESK_SEEDS, runs):
        first, last, majority = _desk_summary(result)
        best = result.profile.best_prompt()
        ok = first > last and majority == best
        hits += ok
        details.append(f"seed {seed}: search {first:.2f}->{last:.2f}, last-quartile prompt {majority} "
                       f"(best {best}) {'ok' if ok else 'miss'}")
    ok = hits >= 8 and elapsed < 60.0
    record_acceptance(4, ok, f"{hits}/10 seeds reproduce the shift (need 8), {elapsed:.1f} s (limit 60 s)")
    print("\n".join(details))
    assert ok, "\n".join(details)


def _prompt_column_entropy(dirichlet, columns):
    A = normalize_dirichlet(dirichlet)[0]
    return float(np.mean([entropy(A[m][:, c]) for m in range(3) for c in columns]))


def test_criterion_5_structure_emerges(desk_runs):
    runs, _ = desk_runs
    drops = []
    for result in runs:
        visited = sorted({int(np.argmax(r.beliefs[0])) for r in result.records if max(r.beliefs[0]) > 0.5})
        visited = visited or list(range(DESK["prompts"]))
        h0 = _prompt_column_entropy(result.initial_dirichlet, visited)
        h1 = _prompt_column_entropy(result.dirichlet, visited)
        drops.append(1.0 - h1 / h0)
    ok = min(drops) >= 0.30
    record_acceptance(5, ok, f"prompt-column entropy drop per seed min {min(drops):.0%}, "
                             f"mean {np.mean(drops):.0%} (need >= 30%)")
    assert ok


def test_criterion_6_full_scale_smoke(full_run):
    result, elapsed = full_run
    n_pol = len(enumerate_policies(33, 11, 2))
    ok = len(result.records) == 100 and not result.violations and elapsed < 300 and n_pol == 2025
    record_acceptance(6, ok, f"33/11/3 model, {n_pol} policies, {len(result.records)} steps in {elapsed:.1f} s "
                             f"(limit 300 s), {len(result.violations)} invariant violations")
    assert ok, result.violations[:5]


def test_criterion_7_determinism(tmp_path):
    cfg = RunConfig(**{**DESK, "steps": 60}, seed=5)
    run_experiment(cfg, log_path=tmp_path / "a.jsonl")
    run_experiment(cfg, log_path=tmp_path / "b.jsonl")
    a, b = (tmp_path / "a.jsonl").read_bytes(), (tmp_path / "b.jsonl").read_bytes()
    full = RunConfig(steps=5, seed=5)
    run_experiment(full, log_path=tmp_path / "c.jsonl")
    run_experiment(full, log_path=tmp_path / "d.jsonl")
    c, d = (tmp_path / "c.jsonl").read_bytes(), (tmp_path / "d.jsonl").read_bytes()
    ok = a == b and c == d and len(a.splitlines()) == 61
    record_acceptance(7, ok, f"repeat runs byte-identical: desk {a == b}, full-scale {c == d}")
    assert ok


def test_criterion_8_policy_legality(desk_runs, full_run):
    bad, scanned = [], 0
    for P in range(1, 6):
        for S in range(1, 6):
            for H in (1, 2):
                for mode in ("cartesian", "repeated"):
                    for pi in enumerate_policies(P, S, H, mode):
                        for a in pi:
                            scanned += 1
                            if a[0] > 0 and a[1] > 0 or a[2] != 0:
                                bad.append(a)
    logged = [r.action for res in desk_runs[0] + [full_run[0]] for r in res.records]
    for a in logged:
        try:
            check_action(a)
        except ValueError:
            bad.append(tuple(a))
    ok = not bad
    record_acceptance(8, ok, f"{scanned} enumerated and {len(logged)} logged actions scanned, "
                             f"{len(bad)} mutual-exclusion violations")
    assert ok
