"""Command-line entry point: ``sqkdsim``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .adversary import STRATEGIES
from .config import ConfigError, ExperimentSpec, NamedRun, parse_config, run_config_from_dict
from .exact import MAX_EXACT_ROUNDS
from .experiment import execute


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sqkdsim",
        description="Simulate the classical-Bob key distribution protocol under eavesdropping attacks.",
    )
    p.add_argument("--config", type=Path, help="YAML/JSON experiment document")
    p.add_argument("--rounds", type=int, help="override the number of rounds")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), help="override the eavesdropping strategy")
    p.add_argument("--d", type=float, help="fingerprint identification probability")
    p.add_argument("--format", choices=("json", "csv"), help="report format (default json)")
    p.add_argument("--out", help="report path (default stdout)")
    p.add_argument("--emit-transcript", metavar="PATH", help="write every round record, one JSON object per line")
    p.add_argument(
        "--exact",
        action="store_true",
        help=f"enumerate every branch exactly instead of sampling (rounds <= {MAX_EXACT_ROUNDS})",
    )
    p.add_argument("--workers", type=int, default=1, help="processes used to simulate rounds")
    p.add_argument(
        "--detection-curve",
        type=_int_list,
        metavar="M1,M2,...",
        help="estimate P(at least one CTRL_X error among m check photons) instead of a report",
    )
    p.add_argument("--trials", type=int, default=10_000, help="trials per m for --detection-curve")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    overrides = {k: getattr(args, k) for k in ("rounds", "seed", "strategy", "d") if getattr(args, k) is not None}
    runs = spec.runs
    if overrides:
        runs = []
        for run in spec.runs:
            fields = {**run.config.to_dict(), **overrides}
            if fields["strategy"] != "fingerprint":
                fields.pop("d", None)
            runs.append(NamedRun(run.name, run_config_from_dict(fields)))
    return ExperimentSpec(
        runs=runs,
        format=args.format or spec.format,
        out=args.out if args.out is not None else spec.out,
        sweep=spec.sweep,
    )


def load_spec(args: argparse.Namespace) -> ExperimentSpec:
    if args.config is not None:
        spec = parse_config(args.config.read_text(encoding="utf-8"))
    else:
        fields = {k: getattr(args, k) for k in ("rounds", "seed", "strategy", "d") if getattr(args, k) is not None}
        spec = ExperimentSpec(runs=[NamedRun(fields.get("strategy", "none"), run_config_from_dict(fields))])
        args = argparse.Namespace(**{**vars(args), "rounds": None, "seed": None, "strategy": None, "d": None})
    spec = _apply_overrides(spec, args)
    if args.exact:
        for i, run in enumerate(spec.runs):
            if run.config.rounds > MAX_EXACT_ROUNDS:
                raise ConfigError(f"runs[{i}].rounds", f"--exact supports at most {MAX_EXACT_ROUNDS} rounds")
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        spec = load_spec(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return execute(
        spec,
        transcript_path=args.emit_transcript,
        exact=args.exact,
        workers=args.workers,
        detection_m=args.detection_curve,
        trials=args.trials,
    )


if __name__ == "__main__":
    sys.exit(main())
