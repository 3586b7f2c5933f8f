"""Command line entry point.

Subcommands map one-to-one onto experiment kinds (solve runs an
elliptic config).  Exit codes: 0 all checks passed, 1 a check failed,
2 invalid configuration, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import load_config
from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    NumericalError,
    ParseError,
    PreconditionError,
)
from .runner import run_experiment

__all__ = ["main"]

COMMANDS = {
    "solve": "elliptic",
    "parabolic": "parabolic",
    "growth": "growth",
    "nondeg": "nondeg",
    "porosity": "porosity",
    "oracle": "oracle",
    "audit": "audit",
    "convergence": "convergence",
}

_HELP = {
    "solve": "solve one elliptic obstacle problem and certify its optimality conditions",
    "parabolic": "march one implicit parabolic run and check the time-Lipschitz bound",
    "growth": "fit the free-boundary growth exponent at an anchor point",
    "nondeg": "measure quadratic non-degeneracy of detachment at an anchor point",
    "porosity": "sample free-boundary cell densities over several balls",
    "oracle": "residual-scan a closed-form solution with a perturbed negative control",
    "audit": "independently determine a closed-form solution's amplitude constant",
    "convergence": "repeat a solve under grid refinement against the exact reference",
}

CONFIG_ERRORS = (
    ConfigurationError,
    ParseError,
    EvaluationError,
    PreconditionError,
    DomainError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plaplab",
        description="Numerical laboratory for p-Laplacian obstacle problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", required=True, help="path to a JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--threads", type=int, default=None, help="worker thread budget")
        sp.add_argument(
            "--seed",
            type=int,
            default=None,
            help="seed for randomized property tests; never affects solutions",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        expected = COMMANDS[args.command]
        if cfg.kind != expected:
            raise ConfigurationError(
                f"kind: config says {cfg.kind!r} but subcommand "
                f"{args.command!r} expects {expected!r}"
            )
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out=args.out)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigurationError("threads: must be at least 1")
            cfg = dataclasses.replace(cfg, threads=args.threads)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigurationError("seed: must be nonnegative")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        envelope = run_experiment(cfg)
    except CONFIG_ERRORS as err:
        print(f"plaplab: invalid configuration: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"plaplab: numerical failure: {err}", file=sys.stderr)
        return 3

    print(f"plaplab {args.command}: config {envelope.config_digest[:12]}")
    for check in envelope.checks:
        mark = "PASS" if check.passed else "FAIL"
        line = f"  [{mark}] {check.name}"
        if check.value is not None:
            line += f"  value={check.value:.6g}"
        if check.target:
            line += f"  target: {check.target}"
        if check.detail:
            line += f"  ({check.detail})"
        print(line)
    where = cfg.out or "(no output directory)"
    verdict = "PASS" if envelope.passed else "FAIL"
    print(f"result: {verdict}  artifacts: {where}")
    if envelope.payload.get("non_convergence"):
        return 3
    return 0 if envelope.passed else 1


if __name__ == "__main__":
    sys.exit(main())
