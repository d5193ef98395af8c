"""Command-line entry point for running sweeps and the validation suite.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validation suite failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .errors import (AccuracyError, ConfigError, ConstructionError,
                     InsufficientTrialsError, InvalidParameterError,
                     ThresholdInversionError)
from .experiments import RUNNERS, default_config, load_config, run_validate

log = logging.getLogger("twabort")

_NUMERIC_ERRORS = (AccuracyError, ConstructionError, InsufficientTrialsError,
                   ThresholdInversionError, np.linalg.LinAlgError,
                   FloatingPointError)


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors, not generic exits."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twabort",
                     description="Adaptive detection experiments: threshold "
                                 "calibration, performance sweeps, and "
                                 "self-validation against closed forms.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "sweep-snr": "detection probability versus SNR",
        "sweep-sin2psi": "detection probability versus interference-rejection angle",
        "sweep-kappa": "detection probability versus the tuning exponent",
        "mesa": "detection surface over SNR and nominal-steering mismatch",
        "calibrate": "analytic and empirical thresholds for the configured detectors",
        "validate": "run the analytic/Monte-Carlo consistency suite",
    }
    for name, help_text in commands.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="INI experiment configuration file")
        cmd.add_argument("--out", help="output path (CSV, or text report for validate); "
                                       "defaults to stdout")
        cmd.add_argument("--seed", type=int, help="Monte Carlo base seed override")
        cmd.add_argument("--trials-threshold", type=int,
                         help="null trials used for threshold calibration")
        cmd.add_argument("--trials-pd", type=int,
                         help="trials per point for detection estimates")
        cmd.add_argument("--pfa", type=float, help="false alarm design point")
        cmd.add_argument("--workers", type=int, help="worker processes")
        if name == "validate":
            cmd.add_argument("--tolerance-scale", type=float, default=1.0,
                             help="multiply every pass bound (diagnostic use)")
    return parser


def _apply_overrides(cfg, args):
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.trials_threshold is not None:
        overrides["trials_threshold"] = args.trials_threshold
    if args.trials_pd is not None:
        overrides["trials_pd"] = args.trials_pd
    if args.pfa is not None:
        overrides["pfa_target"] = args.pfa
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg = replace(cfg, **overrides) if overrides else cfg
    if not 0.0 < cfg.pfa_target < 1.0:
        raise ConfigError(f"pfa must lie in (0, 1), got {cfg.pfa_target}")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    if cfg.trials_threshold * cfg.pfa_target < 10.0:
        raise ConfigError("trials-threshold too small for the requested pfa: need "
                          "at least 10 expected exceedances")
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        log.info("wrote %s", out)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config) if args.config else default_config()
        cfg = _apply_overrides(cfg, args)
        if args.command == "validate":
            report = run_validate(cfg, tolerance_scale=args.tolerance_scale)
            _emit(report.render(), args.out)
            return 0 if report.passed else 3
        result = RUNNERS[args.command](cfg)
        _emit(result.to_csv(), args.out)
        return 0
    except (ConfigError, InvalidParameterError) as exc:
        log.error("configuration error: %s", exc)
        return 1
    except _NUMERIC_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
