"""Command-line front end.

Exit codes: 0 success, 1 runtime or check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import SCENARIOS, ConfigError, apply_overrides, parse_config, scenario_dict
from .harness import best_arm_curve, run_experiment, write_results
from .rewards import RewardKind

SEED_ENV = "SPECBANDIT_SEED"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_seed(text: str, source: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise ConfigError(source, f"expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError(source, f"must lie in [0, 2^64), got {seed}")
    return seed


def _raw_config(args) -> dict:
    if args.config and args.scenario:
        raise ConfigError("config", "give either --config or --scenario, not both")
    if args.scenario:
        raw = scenario_dict(args.scenario)
    elif args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"no such file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{args.config} is not valid JSON ({exc})") from None
    else:
        raise ConfigError("config", "one of --config or --scenario is required")
    return apply_overrides(raw, args.override)


def resolve_seed(cli_seed: Optional[str], config_seed: int) -> int:
    """--seed beats the environment variable, which beats the config file."""
    if cli_seed is not None:
        return _parse_seed(cli_seed, "--seed")
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return _parse_seed(env, SEED_ENV)
    return config_seed


def load(args, raw: Optional[dict] = None):
    raw = _raw_config(args) if raw is None else raw
    config = parse_config(raw)
    return replace(config, seed=resolve_seed(args.seed, config.seed))


def _emit(args, rows) -> None:
    if args.quiet:
        return
    for row in rows:
        print("\t".join(str(x) for x in row))


def _report_rows(result) -> list:
    r = result.report
    return [
        ("policy", result.config.policy.kind),
        ("reward", result.config.reward.value),
        ("replications", r.replications),
        ("policy_mean_rounds", f"{r.policy_mean_rounds:.6g}"),
        ("oracle_mean_rounds", f"{r.oracle_mean_rounds:.6g}"),
        ("stopping_regret", f"{r.stopping_regret:.6g}"),
        ("std_err", f"{r.std_err:.6g}"),
        ("switching_term", f"{r.switching_term:.6g}"),
    ]


def cmd_run(args) -> int:
    config = load(args)
    result = run_experiment(config, jobs=args.jobs, keep_traces=args.traces)
    paths = write_results(
        result, args.out, traces=args.traces, plot=not args.no_plot, extra={"overrides": list(args.override or [])}
    )
    _emit(args, _report_rows(result) + [("wrote", p) for p in paths])
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.print_config:
        raw = apply_overrides(scenario_dict(args.scenario), args.override)
        print(json.dumps(raw, indent=2, sort_keys=True))
        return EXIT_OK
    return cmd_run(args)


def cmd_verify(args) -> int:
    from .verify import run_checks

    names = [n.strip() for n in args.checks.split(",") if n.strip()] if args.checks else None
    try:
        results = run_checks(names, echo=None if args.quiet else print)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    if not args.quiet:
        print(f"all {len(results)} checks passed")
    return EXIT_OK


def seed_group_rounds(traces, groups: int, threshold: float) -> list:
    """Rounds-to-threshold of the best-arm curve within each contiguous block of replications."""
    blocks = np.array_split(np.arange(len(traces)), groups)
    return [best_arm_curve([traces[i] for i in b]).rounds_to(threshold) for b in blocks if len(b)]


def _median_rounds(values) -> Optional[float]:
    """Median with 'never reached' (None) treated as +inf; None if the median itself is infinite."""
    med = float(np.median([np.inf if v is None else v for v in values]))
    return None if np.isinf(med) else med


def cmd_compare_rewards(args) -> int:
    base = load(args)
    if base.replications < args.groups:
        raise ConfigError("replications", f"need at least --groups={args.groups} replications")
    os.makedirs(args.out, exist_ok=True)
    summary = {"threshold": args.threshold, "groups": args.groups, "config": None, "rewards": {}}
    curves = {}
    per_group = {}
    for kind in (RewardKind.BE, RewardKind.BD):
        cfg = replace(base.with_policy("ucb"), reward=kind)
        result = run_experiment(cfg, jobs=args.jobs, keep_traces=False)
        curves[kind.value] = result.curve
        per_group[kind.value] = seed_group_rounds(result.traces, args.groups, args.threshold)
        summary["config"] = cfg.to_dict()
        summary["rewards"][kind.value] = {
            "report": result.report.to_dict(),
            "rounds_to_threshold": result.curve.rounds_to(args.threshold),
            "group_rounds_to_threshold": per_group[kind.value],
            "median_group_rounds": _median_rounds(per_group[kind.value]),
        }
    pairs = list(zip(per_group["bd"], per_group["be"]))
    bd_wins = sum((np.inf if bd is None else bd) <= (np.inf if be is None else be) for bd, be in pairs)
    summary["bd_not_slower_fraction"] = bd_wins / len(pairs)
    summary["config"].pop("reward")

    with open(os.path.join(args.out, "compare.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    horizon = max(len(c) for c in curves.values())
    with open(os.path.join(args.out, "compare.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "be_ratio", "be_active", "bd_ratio", "bd_active"])
        for t in range(horizon):
            row = [t]
            for name in ("be", "bd"):
                c = curves[name]
                row += [repr(float(c.ratio[t])), int(c.active[t])] if t < len(c) else ["", 0]
            w.writerow(row)
    if not args.no_plot:
        from .plotting import plot_best_arm_curves

        plot_best_arm_curves({f"UCB + {k.upper()}": c for k, c in curves.items()}, os.path.join(args.out, "plot.svg"))

    rows = [("reward", "median_group_rounds_to_%g" % args.threshold, "pooled_rounds_to", "stopping_regret")]
    for name in ("be", "bd"):
        s = summary["rewards"][name]
        rows.append((name, s["median_group_rounds"], s["rounds_to_threshold"], f"{s['report']['stopping_regret']:.6g}"))
    rows.append(("bd_not_slower_fraction", summary["bd_not_slower_fraction"]))
    _emit(args, rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [v.strip() for v in (args.values or "").split(",") if v.strip()]
    if not values:
        raise ConfigError("--values", "sweep needs at least one value")
    raw = _raw_config(args)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for v in values:
        config = load(args, apply_overrides(raw, [f"{args.param}={v}"]))
        result = run_experiment(config, jobs=args.jobs, keep_traces=False)
        r = result.report
        rounds = sum(t.tau for t in result.traces)
        accepted = sum(t.total_n_acc for t in result.traces)
        rows.append(
            {
                "param": args.param,
                "value": v,
                "policy_mean_rounds": r.policy_mean_rounds,
                "oracle_mean_rounds": r.oracle_mean_rounds,
                "stopping_regret": r.stopping_regret,
                "std_err": r.std_err,
                "switching_term": r.switching_term,
                "mean_n_acc_per_round": accepted / rounds,
                "replications": r.replications,
            }
        )
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(x) if isinstance(x, float) else x for k, x in row.items()})
    if not args.no_plot:
        from .plotting import plot_sweep

        plot_sweep(values, [r["mean_n_acc_per_round"] for r in rows], os.path.join(args.out, "plot.svg"),
                   args.param, "mean accepted tokens per round")
    _emit(args, [tuple(rows[0])] + [tuple(f"{x:.6g}" if isinstance(x, float) else x for x in r.values()) for r in rows])
    return EXIT_OK


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--scenario", choices=SCENARIOS, help="use a canned scenario instead of --config")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--seed", metavar="U64", help=f"base seed; overrides ${SEED_ENV} and the config")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for replications")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path config override, e.g. policy.beta=0.05 (repeatable)")
    p.add_argument("--no-plot", action="store_true", help="skip plot.svg")
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specbandit", description="Drafter-selection bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a config file")
    _common(p)
    p.add_argument("--traces", action="store_true", help="also write per-round traces.csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scenario", help="run (or print) a canned scenario")
    p.add_argument("scenario", choices=SCENARIOS)
    _common(p, config=False)
    p.add_argument("--traces", action="store_true")
    p.add_argument("--print-config", action="store_true", help="print the scenario config as JSON and exit")
    p.set_defaults(func=cmd_scenario, config=None)

    p = sub.add_parser("verify", help="run the analytic self-check suite")
    p.add_argument("--checks", metavar="LIST", help="comma-separated subset of checks")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare-rewards", help="UCB with BE vs BD rewards on paired seeds")
    _common(p)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--groups", type=int, default=5, help="seed groups for the median statistic")
    p.set_defaults(func=cmd_compare_rewards)

    p = sub.add_parser("sweep", help="one experiment per value of a config parameter")
    _common(p)
    p.add_argument("--param", required=True, metavar="KEY", help="dotted config path, e.g. n_max or policy.beta")
    p.add_argument("--values", required=True, metavar="LIST", help="comma-separated values")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
