#!/usr/bin/env python3
"""
xbranch: dual-branch cross-attention networks for point clouds

Entry point for training, evaluation, gradient checking, ablation sweeps and
kernel benchmarks. Config keys can be overridden with dotted flags
(`--model.k 16`, `--train.epochs=5`) or bare `section.key=value` arguments.

Exit codes: 0 ok, 1 config or input error, 2 numeric abort, 3 check failed.
"""

import argparse
import sys
import os

# Add the current directory to Python path for importing src modules
sys.path.insert(0, os.path.dirname(__file__))

from src.commands import (
    SWEEPS,
    cmd_ablate,
    cmd_bench,
    cmd_costs,
    cmd_eval,
    cmd_gradcheck,
    cmd_init_config,
    cmd_train,
    run_command,
)


def collect_overrides(tokens):
    """
    Pull dotted config overrides out of the raw argument list.

    Returns:
        (overrides, remaining) where overrides are `key=value` strings and
        remaining is handed to argparse
    """
    overrides, remaining = [], []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        key = token.split("=", 1)[0]
        if token.startswith("--") and "." in key:
            if "=" in token:
                overrides.append(token[2:])
            elif i + 1 < len(tokens):
                overrides.append(f"{token[2:]}={tokens[i + 1]}")
                i += 1
            else:
                remaining.append(token)
        elif not token.startswith("-") and "=" in token and "." in key and os.sep not in key:
            overrides.append(token)
        else:
            remaining.append(token)
        i += 1
    return overrides, remaining


def build_parser():
    parser = argparse.ArgumentParser(
        description="Dual-branch cross-attention networks for point clouds"
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def with_config(p):
        p.add_argument(
            "--config",
            default=None,
            help="Path to configuration file (default: auto-detect)"
        )
        return p

    train = with_config(sub.add_parser("train", help="Train a model"))
    train.add_argument("config_path", nargs="?", default=None, help="Run configuration (JSON or YAML)")
    train.add_argument("--out", default=None, help="Output directory (default: output.dir)")
    train.add_argument("--jobs", type=int, default=None, help="Evaluation worker threads")
    train.add_argument("--quiet", action="store_true", help="Hide the progress display")

    evaluate = with_config(sub.add_parser("eval", help="Evaluate a checkpoint"))
    evaluate.add_argument("checkpoint", help="Checkpoint written by train")
    evaluate.add_argument("--dataset", default="test", help="Split to evaluate: train or test (default: test)")
    evaluate.add_argument("--out", default=None, help="Directory receiving eval.csv")
    evaluate.add_argument("--jobs", type=int, default=None, help="Evaluation worker threads")

    gradcheck = with_config(sub.add_parser("gradcheck", help="Finite-difference gradient check"))
    gradcheck.add_argument("--inject-bug", action="store_true",
                           help="Perturb one analytic gradient by +0.1 (the check must fail)")

    ablate = with_config(sub.add_parser("ablate", help="Run an ablation sweep"))
    ablate.add_argument("--sweep", default="fusion", help=f"One of: {', '.join(SWEEPS)}")
    ablate.add_argument("--out", default=None, help="Output directory (default: output.dir)")
    ablate.add_argument("--jobs", type=int, default=None, help="Evaluation worker threads")
    ablate.add_argument("--quiet", action="store_true", help="Hide the progress display")

    bench = with_config(sub.add_parser("bench", help="Time the sampling kernels"))
    bench.add_argument("--out", default=None, help="Directory receiving bench.csv")

    costs = with_config(sub.add_parser("costs", help="Report MACs and parameters (CA and MSA)"))
    costs.add_argument("--out", default=None, help="Directory receiving costs.json")

    init = sub.add_parser("init-config", help="Create a default configuration file and exit")
    init.add_argument("path", nargs="?", default="xbranch.json")
    return parser


def main(argv=None):
    parser = build_parser()
    overrides, remaining = collect_overrides(sys.argv[1:] if argv is None else list(argv))
    args = parser.parse_args(remaining)
    if args.command is None:
        parser.print_help()
        return 1
    if getattr(args, "jobs", None) is not None:
        overrides.append(f"train.jobs={args.jobs}")

    if args.command == "train":
        return run_command(cmd_train, args.config_path or args.config, args.out, overrides, args.quiet)
    if args.command == "eval":
        return run_command(cmd_eval, args.checkpoint, args.config, args.dataset, args.out, None, overrides)
    if args.command == "gradcheck":
        return run_command(cmd_gradcheck, args.config, args.inject_bug, overrides)
    if args.command == "ablate":
        return run_command(cmd_ablate, args.config, args.sweep, args.out, overrides, args.quiet)
    if args.command == "bench":
        return run_command(cmd_bench, args.config, args.out, overrides)
    if args.command == "costs":
        return run_command(cmd_costs, args.config, args.out, overrides)
    return run_command(cmd_init_config, args.path)


if __name__ == "__main__":
    sys.exit(main())
