"""Command-line entry point: train, eval, transfer, oracle, validate-config.

Exit codes: 0 success, 2 usage/config error, 3 runtime/numeric error.
All outputs land under the directory given with --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .envs import oracle_optimal_return
from .errors import (
    ConfigError,
    NumericError,
    OracleRefusalError,
    PatError,
    SnapshotError,
    UsageError,
)
from .harness import (
    evaluate,
    load_config,
    load_team,
    resolved_mapping,
    run_training,
    run_transfer,
)
from .harness.run import write_manifest

USAGE_EXIT = 2
RUNTIME_EXIT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pat",
        description="Decentralized multi-agent RL with dual acting modes and a "
                    "shared attention teacher selector.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", type=Path, default=None, help="config file path")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        if needs_out:
            p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seeds", type=int, default=None, metavar="N",
                       help="use seeds 0..N-1 instead of the configured list")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    train = sub.add_parser("train", help="run training over every configured seed")
    common(train)
    train.set_defaults(func=cmd_train)

    transfer = sub.add_parser("transfer", help="train with an imported shared-attention snapshot")
    common(transfer)
    transfer.set_defaults(func=cmd_transfer)

    ev = sub.add_parser("eval", help="evaluate trained snapshots greedily")
    common(ev)
    ev.add_argument("--snapshots", type=Path, required=True,
                    help="training output directory holding seed_*/snapshots")
    ev.add_argument("--episodes", type=int, default=None,
                    help="evaluation episodes per seed (default: config eval_episodes)")
    ev.set_defaults(func=cmd_eval)

    oracle = sub.add_parser("oracle", help="exact optimal return for a tiny single-agent spec")
    common(oracle, needs_out=False)
    oracle.set_defaults(func=cmd_oracle)

    validate = sub.add_parser("validate-config", help="parse the config and exit")
    common(validate, needs_out=False)
    validate.set_defaults(func=cmd_validate)

    return parser


def _load(args):
    config = load_config(path=args.config, overrides=args.overrides)
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError("--seeds must be >= 1")
        config = load_config(path=args.config,
                             overrides=list(args.overrides)
                             + [f"seeds={','.join(str(s) for s in range(args.seeds))}"])
    return config


def _print_result(result, quiet: bool) -> None:
    if quiet:
        return
    for name, agg in result.aggregates.items():
        print(f"{name}: {agg['mean']:.4g} +- {agg['std']:.4g} (n={agg['n_seeds']})")
    if result.diverged_seeds:
        print(f"diverged seeds (excluded): {list(result.diverged_seeds)}")


def cmd_train(args) -> int:
    config = _load(args)
    result = run_training(config, args.out)
    _print_result(result, args.quiet)
    return 0


def cmd_transfer(args) -> int:
    config = _load(args)
    result = run_transfer(config, args.out)
    _print_result(result, args.quiet)
    return 0


def cmd_eval(args) -> int:
    config = _load(args)
    episodes = args.episodes or config.eval_episodes
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, config)
    summary = {}
    for seed in config.seeds:
        snap_dir = Path(args.snapshots) / f"seed_{seed}" / "snapshots"
        if not snap_dir.exists():
            raise ConfigError(f"no snapshots for seed {seed} under {args.snapshots}")
        team = load_team(config, seed, snap_dir)
        record = evaluate(config, team, episodes, seed)
        summary[str(seed)] = {
            "avg_step": record.avg_step,
            "success_rate": record.success_rate,
            "team_reward": record.team_reward,
            "student_mode_freq": record.student_mode_freq,
        }
        if not args.quiet:
            print(f"seed {seed}: reward {record.team_reward:.4g}, "
                  f"steps {record.avg_step:.4g}, success {record.success_rate:.2f}")
    (out / "eval_summary.json").write_text(json.dumps(
        {"episodes": episodes, "per_seed": summary}, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_oracle(args) -> int:
    config = _load(args)
    value = oracle_optimal_return(config.env, seed=config.seeds[0])
    print(f"{value:.10g}")
    return 0


def cmd_validate(args) -> int:
    config = _load(args)
    if not args.quiet:
        print(f"config OK ({len(resolved_mapping(config))} keys, "
              f"{len(config.seeds)} seeds, algorithm {config.algorithm})")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, SnapshotError, OracleRefusalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (NumericError, PatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
