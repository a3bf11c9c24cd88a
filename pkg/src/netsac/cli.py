"""Command-line entry point: ``netsac <subcommand> --config run.json``.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import analysis
from . import experiment as ex

log = logging.getLogger("netsac")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netsac", description="Scalable actor-critic for networked MDPs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, parallel: bool = False) -> None:
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None, help="run only this seed instead of the configured list")
        p.add_argument("--out-dir", default=None, help="output directory (default: the config's output.dir)")
        if parallel:
            p.add_argument("--parallel", type=int, default=1, help="worker processes for independent cells")

    common(sub.add_parser("sweep", help="train SAC over the configured kappas and seeds"), parallel=True)
    common(sub.add_parser("wireless", help="SAC against the best ALOHA send probability"), parallel=True)
    p = sub.add_parser("evaluate", help="evaluate a saved policy (default: uniform)")
    common(p)
    p.add_argument("--policy", default=None, help="policy checkpoint JSON")
    common(sub.add_parser("decay-report", help="exact dependence-decay and truncation-error table"))
    common(sub.add_parser("validate", help="check the config and print advisory warnings"))
    p = sub.add_parser("analyze", help="summarize a results CSV")
    p.add_argument("csv", help="results CSV written by sweep or wireless")
    return parser


def _load(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ex.ConfigError("--seed must be non-negative")
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    return cfg


def _analyze(path: str) -> str:
    rows = ex.read_results(path)
    if rows and "method" in rows[0]:
        return analysis.format_summary(analysis.summarize_wireless(rows))
    return analysis.format_summary(analysis.summarize_sweep(rows))


def run(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analyze":
            print(_analyze(args.csv))
            return EXIT_OK
        cfg = _load(args)
        out = Path(args.out_dir) if args.out_dir is not None else None
        if args.command == "validate":
            for w in ex.validate_config(cfg):
                print(f"warning: {w}")
            return EXIT_OK
        if getattr(args, "parallel", 1) < 1:
            raise ex.ConfigError("--parallel must be at least 1")
        for w in ex.validate_config(cfg):
            log.warning(w)
        if args.command == "sweep":
            ex.run_kappa_sweep(cfg, out, args.parallel)
        elif args.command == "wireless":
            ex.run_wireless_benchmark(cfg, out, args.parallel)
        elif args.command == "evaluate":
            ex.run_evaluate(cfg, args.policy, out)
        elif args.command == "decay-report":
            ex.run_decay_report(cfg, out)
        target = out if out is not None else Path(cfg.output.dir)
        print(target / cfg.output.csv)
        return EXIT_OK
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
