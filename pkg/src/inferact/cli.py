"""Command-line entry point: ``inferact run | export | analyze | validate-config``."""

from __future__ import annotations

import argparse
import collections
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from .agent import ConfigError, RunConfig, run_experiment, write_snapshot
from .remote import RemoteError
from .reporting import EXPORT_KINDS, LogError, analyze, export, read_log

logger = logging.getLogger("inferact")

# CLI flag -> RunConfig field, for flags whose names differ only by dashes.
OVERRIDES = (
    "prompts", "searches", "info_levels", "quality_levels", "eta", "gamma", "alpha",
    "horizon", "policy_mode", "selection", "steps", "seed", "env", "profile_path",
    "profile_seed", "num_good", "noise_sd", "idle", "endpoint", "model_name", "question",
    "transcript_path", "top_k", "early_stop", "snapshot_interval",
)


def load_schema() -> dict:
    text = resources.files("inferact").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def schema_errors(doc) -> list[str]:
    """Schema violations as ``field: message`` strings, sorted by path."""
    validator = jsonschema.Draft202012Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        where = ".".join(str(p) for p in err.absolute_path)
        if not where and err.validator == "additionalProperties":
            extra = sorted(set(doc) - set(load_schema()["properties"]))
            where = extra[0] if extra else "config"
        out.append(f"{where or 'config'}: {err.message}")
    return out


def build_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config} ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: not valid JSON ({exc})") from exc
    for name in OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if args.record_timing:
        doc["record_timing"] = True
    errors = schema_errors(doc)
    if errors:
        raise ConfigError(errors[0])
    return RunConfig.from_dict(doc)


def cmd_run(args) -> int:
    cfg = build_config(args)
    log_path = Path(args.log) if args.log else Path(f"inferact_run_seed{cfg.seed}.jsonl")
    result = run_experiment(cfg, log_path=log_path, snapshot_dir=args.snapshot_dir)
    if args.snapshot:
        write_snapshot(result, args.snapshot)
    counts = collections.Counter(r.action_type for r in result.records)
    final_vfe = result.records[-1].vfe
    print(f"steps: {len(result.records)}")
    print(f"final VFE: {final_vfe:.6f}")
    print("actions: " + ", ".join(f"{k}={counts.get(k, 0)}" for k in ("prompt", "search", "none")))
    print(f"log: {log_path}")
    if result.violations:
        print(f"invariant violations: {len(result.violations)} (first: {result.violations[0]})")
        return 1
    return 0


def _parse_steps(text):
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise LogError(f"--steps: expected comma-separated integers, got {text!r}") from exc


def cmd_export(args) -> int:
    paths = export(args.log, args.kind, args.out, _parse_steps(args.steps), args.format)
    for p in paths:
        print(p)
    return 0


def cmd_analyze(args) -> int:
    header, steps = read_log(args.log)
    report = analyze(header, steps)
    if args.json:
        print(json.dumps(report, indent=1))
        return 0
    fmt = lambda xs: " ".join("-" if x is None else f"{x:.3f}" for x in xs)  # noqa: E731
    print(f"steps: {report['steps']}")
    print(f"search fraction by quartile: {fmt(report['search_fraction_by_quartile'])}")
    print(f"mean prompt quality by quartile: {fmt(report['mean_prompt_quality_by_quartile'])}")
    print(f"mean search quality by quartile: {fmt(report['mean_search_quality_by_quartile'])}")
    for name, traj in report["column_entropy"].items():
        print(f"column entropy {name}: {traj[0]:.3f} -> {traj[-1]:.3f}")
    print(f"prompt-dominated from step: {report['transition_step']}")
    return 0


def cmd_validate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {args.config} ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from exc
    errors = schema_errors(doc)
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return 2
    RunConfig.from_dict(doc)
    print(f"{args.config}: ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inferact", description="Active-inference prompt/search agent.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write a JSONL log")
    run.add_argument("--config", help="JSON configuration file")
    run.add_argument("--log", help="output log path (default inferact_run_seed<seed>.jsonl)")
    run.add_argument("--snapshot", help="write the final model and concentrations as JSON")
    run.add_argument("--snapshot-dir", help="directory for periodic snapshots")
    run.add_argument("--prompts", type=int, help="prompt states (default 33)")
    run.add_argument("--searches", type=int, help="search states (default 11)")
    run.add_argument("--info-levels", dest="info_levels", type=int, help="info levels (default 3)")
    run.add_argument("--quality-levels", dest="quality_levels", type=int, help="score levels (default 11)")
    run.add_argument("--eta", type=float, help="learning rate (default 50.0)")
    run.add_argument("--gamma", type=float, help="policy precision (default 8.0)")
    run.add_argument("--alpha", type=float, help="action precision (default 16.0)")
    run.add_argument("--horizon", type=int, help="policy length (default 2)")
    run.add_argument("--policy-mode", dest="policy_mode", choices=["cartesian", "repeated"],
                     help="policy enumeration (default cartesian)")
    run.add_argument("--selection", choices=["deterministic", "stochastic"],
                     help="action selection (default stochastic)")
    run.add_argument("--steps", type=int, help="step budget (default 100)")
    run.add_argument("--seed", type=int, help="random seed (default 0)")
    run.add_argument("--env", choices=["synthetic", "remote"], help="environment (default synthetic)")
    run.add_argument("--profile", dest="profile_path", help="synthetic ground-truth profile JSON")
    run.add_argument("--profile-seed", dest="profile_seed", type=int, help="seed for the generated profile")
    run.add_argument("--num-good", dest="num_good", type=int, help="good prompts in the generated profile")
    run.add_argument("--noise-sd", dest="noise_sd", type=float, help="score noise (default 0.05)")
    run.add_argument("--idle", choices=["soft", "biased", "deterministic"],
                     help="meaning of control 0 for prompt/search (default soft)")
    run.add_argument("--endpoint", help="chat-completion URL for --env remote (key in INFERACT_API_KEY)")
    run.add_argument("--model-name", dest="model_name", help="remote model name (default gpt-4o-mini)")
    run.add_argument("--question", help="research question sent to the remote evaluator")
    run.add_argument("--transcript", dest="transcript_path", help="JSONL transcript of remote calls")
    run.add_argument("--top-k", dest="top_k", type=int, help="policies recorded per step (default 5)")
    run.add_argument("--early-stop", dest="early_stop", type=int, help="stop after N unchanged choices (0 = off)")
    run.add_argument("--snapshot-interval", dest="snapshot_interval", type=int, help="steps between snapshots")
    run.add_argument("--record-timing", action="store_true", help="store wall-clock step durations")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("export", help="write figure data from a log")
    exp.add_argument("log")
    exp.add_argument("kind", choices=EXPORT_KINDS)
    exp.add_argument("--out", default=".", help="output directory")
    exp.add_argument("--steps", help="comma-separated steps (a_matrices: update count; efe_grid: step index)")
    exp.add_argument("--format", choices=["csv", "json"], default="csv")
    exp.set_defaults(func=cmd_export)

    ana = sub.add_parser("analyze", help="summarise a log")
    ana.add_argument("log")
    ana.add_argument("--json", action="store_true", help="print the full report as JSON")
    ana.set_defaults(func=cmd_analyze)

    val = sub.add_parser("validate-config", help="check a configuration file")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RemoteError as exc:
        print(f"remote error: {exc}", file=sys.stderr)
        return 3
    except LogError as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
