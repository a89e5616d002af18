"""Command-line front end: generate instances, solve them, run oracles and benchmarks."""

from __future__ import annotations

import argparse
import asyncio
from collections.abc import Sequence
from dataclasses import replace
import logging
import math
import pathlib
import sys
from typing import Any, NoReturn

from .config import CONF_BNB, CONF_PRICING, CONF_SOLVER, load_config, merge_overrides
from .const import (
    DEFAULT_CROSS_RATE,
    EXIT_ERROR,
    EXIT_OK,
    INSTANCE_KINDS,
    KIND_JAP_CP,
    NODE_BEST_BOUND,
    NODE_DEPTH_FIRST,
    ORACLE_METHODS,
    PRICE_SCHEME_ARITHMETIC,
    PRICE_SCHEMES,
    SOLVE_METHODS,
)
from .assortment import mixed_beta
from .errors import GnlError
from .formulations import format_cp_gnl_bi, format_gnl_bis, format_mgnl_bi
from .instances import GenSpec, generate, load, save
from .models import GnlModel, MgnlModel
from .pricing import cp_breakpoints
from .reformulate import choose_beta
from .runner import RunRecord, append_record, exit_code_for, oracle_method_for, records_to_csv, run_jobs, run_one

_LOGGER = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors follow the error exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _kind(value: str) -> str:
    kind = value.upper()
    if kind not in INSTANCE_KINDS:
        raise argparse.ArgumentTypeError(f"invalid kind {value!r} (choose from {', '.join(INSTANCE_KINDS)})")
    return kind


def _settings(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    overrides = {
        CONF_BNB: {
            "time_limit": getattr(args, "time_limit", None),
            "node_limit": getattr(args, "node_limit", None),
            "rel_gap": getattr(args, "gap", None),
            "node_selection": NODE_DEPTH_FIRST if getattr(args, "depth_first", False) else None,
        },
        CONF_SOLVER: {
            "bisection_tol": getattr(args, "tol", None),
            "use_joint_logsum": True if getattr(args, "joint_logsum", False) else None,
            "use_sc_cuts": False if getattr(args, "no_sc", False) else None,
        },
        CONF_PRICING: {"epsilon": getattr(args, "epsilon", None), "seed": getattr(args, "polish_seed", None)},
    }
    return merge_overrides(load_config(args.config), overrides)


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=pathlib.Path, default=None, help="YAML settings file")
    parser.add_argument("--tol", type=float, default=None, help="bisection tolerance")
    parser.add_argument("--gap", type=float, default=None, help="relative optimality gap")
    parser.add_argument("--time-limit", type=float, default=None, help="wall-clock seconds per solve")
    parser.add_argument("--node-limit", type=int, default=None, help="branch-and-bound node limit")
    parser.add_argument("--depth-first", action="store_true", help=f"depth-first instead of {NODE_BEST_BOUND}")
    parser.add_argument("--joint-logsum", action="store_true", help="add the joint logsum cut")
    parser.add_argument("--no-sc", action="store_true", help="disable submodular cuts")
    parser.add_argument("--epsilon", type=float, default=None, help="PWLA error target for continuous pricing")
    parser.add_argument("--polish-seed", type=int, default=None, help="seed of the price polish restarts")


def _report(record: RunRecord) -> int:
    code = exit_code_for(record)
    if math.isfinite(record.objective):
        print(f"{record.method} {record.instance}: objective={record.objective:.10g} gap={record.gap:.3g} ({record.termination})")
    else:
        print(f"{record.method} {record.instance}: {record.termination}", file=sys.stderr)
    return code


def cmd_gen(args: argparse.Namespace) -> int:
    """Generate one instance file."""
    try:
        spec = GenSpec(
            kind=args.kind,
            m=args.m,
            n_nests=args.nests,
            seed=args.seed,
            T=args.T,
            L=args.L,
            cross_rate=args.cross_rate,
            price_scheme=args.price_scheme,
            zero_optout_nests=args.zero_optout_nests,
        )
        instance = generate(spec)
        if args.embed_epsilon is not None:
            if instance.kind != KIND_JAP_CP or instance.bounds is None:
                raise GnlError("--embed-epsilon applies to JAP_CP instances only")
            instance = replace(
                instance, breakpoints=cp_breakpoints(instance.structure, instance.bounds, args.embed_epsilon)
            )
        path = save(instance, args.output)
    except GnlError as err:
        print(f"gen failed: {err}", file=sys.stderr)
        return EXIT_ERROR
    _LOGGER.info("Wrote %s instance with %s products to %s", spec.kind, spec.m, path)
    return EXIT_OK


def _single(args: argparse.Namespace, method: str) -> int:
    try:
        settings = _settings(args)
    except GnlError as err:
        print(f"invalid settings: {err}", file=sys.stderr)
        return EXIT_ERROR
    record = run_one(args.instance, method, settings)
    if args.record is not None:
        append_record(args.record, record)
    return _report(record)


def cmd_solve(args: argparse.Namespace) -> int:
    """Solve one instance with one method and optionally append its record."""
    return _single(args, args.method)


def cmd_oracle(args: argparse.Namespace) -> int:
    """Run the exhaustive oracle that matches the instance kind unless a method is given."""
    method = args.method
    if method is None:
        try:
            method = oracle_method_for(load(args.instance).kind)
        except GnlError as err:
            print(f"oracle failed: {err}", file=sys.stderr)
            return EXIT_ERROR
    return _single(args, method)


def cmd_bench(args: argparse.Namespace) -> int:
    """Run every (instance, method) pair of a directory into one sorted CSV."""
    directory = pathlib.Path(args.directory)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        print(f"no instance files in {directory}", file=sys.stderr)
        return EXIT_ERROR
    try:
        settings = _settings(args)
        tasks = [(path, method) for path in paths for method in args.methods]
        if args.with_oracle:
            tasks.extend((path, oracle_method_for(load(path).kind)) for path in paths)
    except GnlError as err:
        print(f"bench failed: {err}", file=sys.stderr)
        return EXIT_ERROR
    records = asyncio.run(run_jobs(tasks, settings, jobs=args.jobs))
    text = records_to_csv(records, timing=not args.no_timing)
    if args.csv is None:
        sys.stdout.write(text)
    else:
        output = pathlib.Path(args.csv)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")
        _LOGGER.info("Wrote %s records to %s", len(records), output)
    return EXIT_OK


def cmd_formulate(args: argparse.Namespace) -> int:
    """Print the text program matching the instance kind."""
    try:
        instance = load(args.instance)
        if isinstance(instance.model, MgnlModel):
            text = format_mgnl_bi(instance.model, instance.constraints, args.beta or mixed_beta(instance.model))
        elif isinstance(instance.model, GnlModel):
            beta = args.beta or choose_beta(instance.model)
            text = format_gnl_bis(instance.model, instance.constraints, beta, args.delta)
        elif instance.bounds is not None:
            text = format_cp_gnl_bi(instance.structure, instance.bounds, instance.constraints, args.beta)
        else:
            raise GnlError(f"no formulation listing for {instance.kind} instances")
    except (GnlError, ValueError) as err:
        print(f"formulate failed: {err}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(text)
    return EXIT_OK


def _methods(value: str) -> list[str]:
    methods = [item.strip() for item in value.split(",") if item.strip()]
    unknown = [item for item in methods if item not in SOLVE_METHODS + ORACLE_METHODS]
    if unknown or not methods:
        raise argparse.ArgumentTypeError(f"unknown methods: {', '.join(unknown) or value!r}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gnlopt", description="GNL assortment and pricing solvers")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = commands.add_parser("gen", help="generate a seeded instance")
    gen.add_argument("--kind", type=_kind, required=True, help=f"one of {', '.join(INSTANCE_KINDS)}")
    gen.add_argument("--m", type=int, required=True, help="number of products")
    gen.add_argument("--nests", type=int, required=True, help="number of nests")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--T", type=int, default=1, help="customer segments (MGNL)")
    gen.add_argument("--L", type=int, default=3, help="price levels per product (JAP_DP)")
    gen.add_argument("--cross-rate", type=float, default=DEFAULT_CROSS_RATE)
    gen.add_argument("--price-scheme", choices=PRICE_SCHEMES, default=PRICE_SCHEME_ARITHMETIC)
    gen.add_argument("--zero-optout-nests", type=int, default=0)
    gen.add_argument("--embed-epsilon", type=float, default=None, help="store PWLA breakpoints (JAP_CP)")
    gen.add_argument("-o", "--output", type=pathlib.Path, required=True)
    gen.set_defaults(handler=cmd_gen)

    solve = commands.add_parser("solve", help="solve one instance")
    solve.add_argument("instance", type=pathlib.Path)
    solve.add_argument("--method", choices=SOLVE_METHODS, required=True)
    solve.add_argument("--record", type=pathlib.Path, default=None, help="CSV file to append the run to")
    _add_solver_flags(solve)
    solve.set_defaults(handler=cmd_solve)

    oracle = commands.add_parser("oracle", help="enumerate one instance exhaustively")
    oracle.add_argument("instance", type=pathlib.Path)
    oracle.add_argument("--method", choices=ORACLE_METHODS, default=None)
    oracle.add_argument("--record", type=pathlib.Path, default=None)
    _add_solver_flags(oracle)
    oracle.set_defaults(handler=cmd_oracle)

    bench = commands.add_parser("bench", help="run methods over a directory of instances")
    bench.add_argument("directory", type=pathlib.Path)
    bench.add_argument("--methods", type=_methods, required=True, help="comma-separated method tags")
    bench.add_argument("--with-oracle", action="store_true")
    bench.add_argument("--csv", type=pathlib.Path, default=None)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--no-timing", action="store_true", help="leave the seconds column empty")
    _add_solver_flags(bench)
    bench.set_defaults(handler=cmd_bench)

    formulate = commands.add_parser("formulate", help="print the program behind an instance")
    formulate.add_argument("instance", type=pathlib.Path)
    formulate.add_argument("--beta", type=float, default=None, help="revenue shift; chosen from the instance when omitted")
    formulate.add_argument("--delta", type=float, default=0.0, help="bisection level of the GNL listing")
    formulate.set_defaults(handler=cmd_formulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
