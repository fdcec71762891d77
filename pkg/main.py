#!/usr/bin/env python3
"""
relaycancel command line.

    relaycancel design <config.json> [--out DIR]
    relaycancel simulate <config.json> [--controller K.json | --none] [--out DIR]
    relaycancel freqresp <config.json> [--controller K.json] [--out DIR]

Exit codes: 0 ok, 1 validation error, 2 infeasible, 3 numerical failure.
"""

import argparse
import sys

import numpy as np

from config import init_app
from services.canceler_service import CancelerService
from src.errors import NumericalFailure, RelayCancelError
from src.run_config import RunConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaycancel",
        description="Design and simulate sampled-data coupling-wave cancelers.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    design = commands.add_parser("design", help="synthesize the H-infinity canceler")
    design.add_argument("config", help="run configuration (JSON)")
    design.add_argument("--out", help="output directory (default: config out_dir)")

    simulate = commands.add_parser("simulate", help="simulate the relay loop")
    simulate.add_argument("config", help="run configuration (JSON)")
    which = simulate.add_mutually_exclusive_group()
    which.add_argument("--controller", help="controller file written by design")
    which.add_argument("--none", action="store_true", help="simulate without a canceler")
    simulate.add_argument("--out", help="output directory (default: config out_dir)")

    freqresp = commands.add_parser("freqresp", help="write gain-vs-frequency tables")
    freqresp.add_argument("config", help="run configuration (JSON)")
    freqresp.add_argument("--controller", help="controller for the error system")
    freqresp.add_argument("--out", help="output directory (default: config out_dir)")

    return parser


def run_command(args) -> int:
    service = CancelerService(RunConfig.load(args.config), out_dir=args.out)

    if args.command == "design":
        report = service.design()
        print(f"gamma = {report['gamma']:.6g}")
        print(f"controller order = {report['order']}")
        print(f"closed-loop spectral radius = {report['closed_loop_radius']:.6g}")
    elif args.command == "simulate":
        metrics = service.simulate(None if args.none else args.controller)
        print(f"l2 error = {metrics['l2_error']:.6g}")
        print(f"diverged = {metrics['diverged']}")
        if metrics["rms_ratio_vs_none"] is not None:
            print(f"rms ratio vs no canceler = {metrics['rms_ratio_vs_none']:.6g}")
        if "bound_check" in metrics:
            print(f"bound check passed = {metrics['bound_check']['passed']}")
    else:
        written = service.freqresp(args.controller)
        for name, path in written.items():
            print(f"{name}: {path}")

    print(f"Outputs in {service.out_dir}")
    return 0


def main(argv=None) -> int:
    """Main entry point for the relaycancel CLI."""
    args = build_parser().parse_args(argv)
    init_app()

    try:
        return run_command(args)
    except RelayCancelError as e:
        print(f"ERROR {e.code}: {e}", file=sys.stderr)
        return e.exit_code
    except np.linalg.LinAlgError as e:
        error = NumericalFailure(str(e))
        print(f"ERROR {error.code}: {error}", file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
