"""Command-line entry point: ``fmab run|preset|pz-sweep|compare``.

Exit status is 0 on success, 2 for configuration problems and 3 for failures
while running.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .harness.compare import compare_runs, format_comparison, write_comparison
from .harness.config import ExperimentConfig, PzSweepConfig, list_presets, load_config, load_preset, parse_override
from .harness.runner import run_experiment, run_pz_sweep

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _overrides(args: argparse.Namespace) -> dict:
    out = dict(parse_override(item) for item in args.override)
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out"] = args.out
    if getattr(args, "reps", None) is not None:
        out["replications"] = args.reps
    if getattr(args, "trials", None) is not None:
        out["trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        out["workers"] = args.workers
    if getattr(args, "plot", False):
        out["plot"] = True
    return out


def _sweep_overrides(overrides: dict) -> dict:
    # run-only flags have no meaning for a sweep
    return {k: v for k, v in overrides.items() if k not in ("replications", "workers", "plot")}


def _execute(cfg) -> None:
    if isinstance(cfg, PzSweepConfig):
        results = run_pz_sweep(cfg)
        for gap, rows in results.items():
            print(f"gap={gap:g}: " + ", ".join(f"M={r.M}:{r.estimate:.4g}" for r in rows))
        print(f"wrote {cfg.out}")
        return
    for s in run_experiment(cfg):
        st = s.stats
        print(
            f"{st['name']}: reps={st['replications']} commit={st['commit_rate']:.2f} "
            f"correct={st['correct_rate']:.2f} phases={st['phases_mean']:.1f} "
            f"regret={st['regret_total']['mean']:.1f}±{st['regret_total']['se']:.1f} -> {s.out_dir}"
        )


def cmd_run(args: argparse.Namespace) -> None:
    ov = _overrides(args)
    cfg = load_config(args.config)
    if isinstance(cfg, PzSweepConfig):
        cfg = load_config(args.config, _sweep_overrides(ov))
    else:
        cfg = load_config(args.config, ov)
    _execute(cfg)


def cmd_preset(args: argparse.Namespace) -> None:
    if args.list or not args.name:
        print("\n".join(list_presets()))
        return
    ov = _overrides(args)
    cfg = load_preset(args.name)
    cfg = load_preset(args.name, _sweep_overrides(ov) if isinstance(cfg, PzSweepConfig) else ov)
    _execute(cfg)


def cmd_pz(args: argparse.Namespace) -> None:
    cfg = load_config(args.config, _sweep_overrides(_overrides(args)))
    if not isinstance(cfg, PzSweepConfig):
        raise ConfigError(f"{args.config} is not a pz-sweep configuration (set kind = \"pz\")")
    _execute(cfg)


def cmd_compare(args: argparse.Namespace) -> None:
    table = compare_runs(args.runs, at=args.at)
    print(format_comparison(table))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_comparison(table, args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("--reps", type=int, help="number of replications")
    runs.add_argument("--workers", type=int, help="worker processes")
    runs.add_argument("--plot", action="store_true", help="also write regret.svg")

    parser = argparse.ArgumentParser(prog="fmab", description="Federated multi-armed bandit experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common, runs], help="run a configuration file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", parents=[common, runs], help="run a bundled preset")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("pz-sweep", parents=[common], help="client-sampling failure sweep")
    p.add_argument("config")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per client count")
    p.set_defaults(func=cmd_pz)

    p = sub.add_parser("compare", help="compare finished runs")
    p.add_argument("runs", nargs="+", help="run directories or their summary.csv files")
    p.add_argument("--at", type=int, help="slot for the fixed-t regret column")
    p.add_argument("--out", help="write the table as CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"fmab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 -- report, don't dump a traceback
        print(f"fmab: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
