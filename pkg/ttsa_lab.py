#!/usr/bin/env python3
"""
ttsa-lab: command-line entry point

    ttsa-lab simulate|rates|covariance|rl --config <file.json> --seed <u64>
             --out <dir> [--threads N] [--strict] [--dry-run]

Exit codes: 0 ok, 1 other lab error, 2 configuration error,
3 numerical failure, 4 acceptance-check failure (--strict).
"""
import argparse
import logging
import sys
from typing import List, Optional

from src.cli import COMMANDS, ExperimentConfig, LabCommands, dumps
from src.config import Config, setup_logging
from src.errors import TtsaLabError

logger = logging.getLogger("ttsa_lab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttsa-lab",
                                     description="Two-timescale stochastic approximation lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment JSON file")
    parser.add_argument("--seed", type=int, default=None,
                        help="64-bit experiment seed (default: config, then TTSA_LAB_SEED)")
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker processes (default {Config.THREADS})")
    parser.add_argument("--strict", action="store_true",
                        help="turn acceptance and assumption checks into failures")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved configuration and exit")
    parser.add_argument("--log-level", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        config = ExperimentConfig.load(args.config)
        commands = LabCommands(config, seed=args.seed, out_dir=args.out,
                               threads=args.threads, strict=args.strict)
        if args.dry_run:
            print(dumps({"command": args.command, "seed": commands.seed,
                         "out": str(commands.out_dir), "threads": commands.threads,
                         "config": config.to_dict()}))
            return 0
        commands.dispatch(args.command)
    except TtsaLabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    logger.info("Artifacts in %s: %s", commands.out_dir, ", ".join(commands.writer.written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
