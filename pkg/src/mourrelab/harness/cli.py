"""``mourrelab`` command line: thin wrappers that build a one-off scenario.

Exit codes: 0 pass, 1 usage or parse error, 2 verdict failure, 3 internal.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ParseError
from . import acceptance
from .config import DEFAULT_TOLERANCES, EXAMPLE45, Operation, Scenario, apply_tolerance_overrides, parse_scenario_text
from .reports import dumps
from .runner import EXIT_PASS, EXIT_USAGE, EXIT_VERDICT, execute, exit_code, run_scenario, summary_line


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 means verdict failure here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pairs(pairs):
    out = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ParseError(f"--tol expects name=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _tolerances(pairs):
    return apply_tolerance_overrides(DEFAULT_TOLERANCES, _pairs(pairs))


def _common(p, model=None, s=None):
    p.add_argument("--model", default=model, help="registry reference, e.g. lattice{N=64}")
    p.add_argument("--interval", help="lo:hi (default: the model's recommended interval)")
    p.add_argument("--s", type=float, default=s, help="weight exponent")
    p.add_argument("--eta", help="min:max:points; an x suffix means multiples of the eta floor")
    p.add_argument("--out", help="output directory")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override (repeatable)")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="mourrelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hs-verify", help="quadrature against the spectral oracle on random matrices")
    _common(p)
    p.add_argument("--symbols", default="chi;chi_R{R=4};lorentzian;phi_R{s=0.6,R=4}",
                   help="semicolon-separated symbol references")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--max-dim", type=int, default=16)
    p.add_argument("--target", type=float, default=3e-7)

    p = sub.add_parser("mourre", help="strict and projected Mourre constants")
    _common(p, model="lattice{N=64}")
    p.add_argument("--projection", choices=("none", "block", "point"), default="none")

    p = sub.add_parser("lap", help="weighted resolvent growth scan")
    _common(p, model="multiplication{N=512,L=50}", s=0.7)
    p.add_argument("--mode", choices=("full", "reduced", "block"), default="full")
    p.add_argument("--expect", choices=("none", "bounded", "divergent"), default="none")

    p = sub.add_parser("probe", help="power-law fit of a weighted norm family")
    _common(p, s=0.6)
    p.add_argument("--family", choices=("remainder", "cutoff_weight", "cutoff_commutator"), default="remainder")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--s-prime", type=float)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--R", default="8,16,32,64,128")
    p.add_argument("--half-width", type=int, default=256)

    p = sub.add_parser("example45", help="block example: strict estimate fails, projected one holds")
    p.add_argument("--out")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE")

    p = sub.add_parser("suite", help="run the acceptance criteria")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--out", help="write suite.json here")

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE")
    return parser


def _single_op(args, op, params):
    for key in ("interval", "eta"):
        if getattr(args, key, None):
            params[key] = getattr(args, key)
    if getattr(args, "s", None) is not None:
        params["s"] = str(args.s)
    sc = Scenario(name=op, model=getattr(args, "model", None), output=args.out or f"out/{op}",
                  seed=args.seed, operations=[Operation(op, op, params)], tolerances=_tolerances(args.tol))
    return execute(sc, args.out or sc.output)


def _params(args):
    if args.command == "hs-verify":
        return "hs_verify", {"symbols": args.symbols, "count": str(args.count),
                             "max_dim": str(args.max_dim), "target": str(args.target)}
    if args.command == "mourre":
        return "mourre", {"projection": args.projection}
    if args.command == "lap":
        return "lap", {"mode": args.mode, "expect": args.expect}
    out = {"family": args.family, "rho": str(args.rho), "k": str(args.k), "alpha": str(args.alpha),
           "scales": args.R, "half_width": str(args.half_width)}
    if args.s_prime is not None:
        out["s_prime"] = str(args.s_prime)
    return "probe", out


def _suite(args):
    numbers = [int(x) for x in args.only.split(",")] if args.only else None
    outcomes = acceptance.run_all(numbers)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "suite.json").write_text(
            dumps({"schema": "mourre-lab/1", "criteria": [o.to_dict() for o in outcomes]}), encoding="utf-8")
    return EXIT_PASS if all(o.passed for o in outcomes) else EXIT_VERDICT


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "suite":
        return _suite(args)
    if args.command == "run":
        def go():
            return run_scenario(args.config, args.out, _pairs(args.tol))
    elif args.command == "example45":
        def go():
            sc = parse_scenario_text(EXAMPLE45, "example45")
            sc.tolerances = apply_tolerance_overrides(sc.tolerances, _pairs(args.tol))
            return execute(sc, args.out or sc.output)
    else:
        def go():
            op, params = _params(args)
            return _single_op(args, op, params)
    status, run = exit_code(go)
    if run is not None:
        print(summary_line(run))
        if len(run.report["operations"]) == 1:
            print(dumps(run.report["operations"][0]["data"]), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
