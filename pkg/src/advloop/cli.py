"""Command-line interface.

Subcommands: run (epochs over scenarios), synth (scenario generation),
score (re-weight recorded reports), flow-bench (sampler step sweep), and
report (batch table from a JSONL file).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .flowmatch import endpoint_error_sweep
from .harness import PlannerBinding, run_batch
from .reports import (
    batch_summary,
    read_epochs_jsonl,
    rescore_epoch,
    summary_csv,
    summary_table,
    write_epochs_jsonl,
)
from .scenario import SCENARIO_KINDS, load_scenario, save_scenario, synth_scenario


def _parse_seeds(text: str) -> list:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or []:
        key, _, value = pair.partition("=")
        if not _:
            raise SystemExit(f"--param expects key=value, got {pair!r}")
        params[key] = float(value)
    return params


def _cmd_synth(args) -> int:
    scenario = synth_scenario(args.kind, args.seed, _parse_params(args.param))
    save_scenario(scenario, args.out)
    print(f"wrote {args.out} ({scenario.id}, {scenario.duration_steps} steps, "
          f"{len(scenario.agents)} agents)")
    return 0


def _collect_scenarios(args) -> list:
    paths = []
    if args.scenario:
        paths.extend(Path(p) for p in args.scenario)
    if args.scenario_dir:
        paths.extend(sorted(Path(args.scenario_dir).glob("*.json")))
    if not paths:
        raise SystemExit("no scenarios: pass --scenario and/or --scenario-dir")
    return [load_scenario(p) for p in paths]


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    scenarios = _collect_scenarios(args)
    binding = PlannerBinding(kind=args.planner, endpoint=args.endpoint, horizon=args.horizon)
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed]

    progress = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    results, failures = run_batch(
        scenarios, binding, cfg, seeds=seeds, adversarial=args.adv, progress=progress
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_epochs_jsonl(results, out_dir / "epochs.jsonl")
    summary = batch_summary(results)
    (out_dir / "summary.csv").write_text(summary_csv(summary), encoding="utf-8")
    table = summary_table(summary)
    (out_dir / "summary.txt").write_text(table + "\n", encoding="utf-8")
    if failures:
        (out_dir / "failures.json").write_text(
            json.dumps(failures, sort_keys=True, indent=2), encoding="utf-8"
        )
    print(table)
    print(f"\n{len(results)} epochs -> {out_dir / 'epochs.jsonl'}"
          + (f" ({len(failures)} failures)" if failures else ""))
    return 1 if failures and not results else 0


def _cmd_score(args) -> int:
    cfg = load_config(args.config)
    results = read_epochs_jsonl(args.reports)
    rescored = [rescore_epoch(r, cfg.weights) for r in results]
    write_epochs_jsonl(rescored, args.out)
    print(summary_table(batch_summary(rescored)))
    print(f"\nrescored {len(rescored)} epochs -> {args.out}")
    return 0


def _cmd_flow_bench(args) -> int:
    steps = [int(s) for s in args.steps.split(",")]
    mu = np.asarray([float(v) for v in args.mu.split(",")])
    rows = endpoint_error_sweep(mu, args.std, steps, n_seeds=args.seeds, seed=args.seed)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_steps", "mean_error", "std_error"])
        writer.writerows(rows)
    for n, mean_err, std_err in rows:
        print(f"n_steps={n:<4d} mean_error={mean_err:.6f} std_error={std_err:.6f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    results = read_epochs_jsonl(args.reports)
    if not results:
        raise SystemExit(f"no epochs in {args.reports}")
    summary = batch_summary(results)
    print(summary_table(summary))
    if args.csv:
        Path(args.csv).write_text(summary_csv(summary), encoding="utf-8")
        print(f"wrote {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advloop",
        description="Closed-loop adversarial evaluation for driving planners.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run two-episode epochs and write reports")
    p_run.add_argument("--scenario", action="append", help="scenario file (repeatable)")
    p_run.add_argument("--scenario-dir", help="directory of scenario .json files")
    p_run.add_argument("--planner", default="idm",
                       choices=["log_replay", "constant_velocity", "idm", "external"])
    p_run.add_argument("--endpoint", help="external planner: command line or host:port")
    p_run.add_argument("--horizon", type=float, default=3.0, help="plan horizon, seconds")
    p_run.add_argument("--adv", dest="adv", action="store_true", default=True)
    p_run.add_argument("--no-adv", dest="adv", action="store_false",
                       help="episode 1 only, no adversary")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--seeds", help="comma-separated seed list (overrides --seed)")
    p_run.add_argument("--config", help="TOML or JSON config file")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_synth = sub.add_parser("synth", help="generate a synthetic scenario")
    p_synth.add_argument("--kind", required=True, choices=list(SCENARIO_KINDS))
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--param", action="append", metavar="KEY=VALUE")
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    p_score = sub.add_parser("score", help="re-score recorded reports with new weights")
    p_score.add_argument("--reports", required=True, help="epochs.jsonl to re-score")
    p_score.add_argument("--config", help="config with [metrics.weights]")
    p_score.add_argument("--out", required=True)
    p_score.set_defaults(func=_cmd_score)

    p_bench = sub.add_parser("flow-bench", help="flow sampler step-count sweep CSV")
    p_bench.add_argument("--steps", default="5,10,20,50,100")
    p_bench.add_argument("--seeds", type=int, default=10_000)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--mu", default="3,-1", help="target mean, comma-separated")
    p_bench.add_argument("--std", type=float, default=0.5)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=_cmd_flow_bench)

    p_report = sub.add_parser("report", help="print the batch table from a JSONL file")
    p_report.add_argument("--reports", required=True)
    p_report.add_argument("--csv", help="also write the table as CSV")
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
