"""Command line driver: ``gen``, ``trial``, ``sweep`` and the canned ``fig2``/``fig3``/``fig4`` grids."""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import replace

from .core import CompletionError
from .harness import (
    SweepGrid,
    aggregate,
    aggregates_to_csv,
    figure_grid,
    figure_points,
    records_to_csv,
    run_sweep,
    run_trial,
)
from .sampling import STRATEGIES, plan_to_json
from .solver import report_to_json
from .synth import InstanceSpec, generate, write_matrix_csv


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _strategies(text: str) -> list[str]:
    out = [s for s in text.split(",") if s]
    bad = set(out) - set(STRATEGIES)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown strategies: {', '.join(sorted(bad))}")
    return out


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write(path, text: str) -> None:
    with _output(path) as fh:
        fh.write(text)


def _add_instance_args(p: argparse.ArgumentParser, grid: bool = False) -> None:
    p.add_argument("--m", type=int, default=50, help="rows")
    p.add_argument("--n", type=int, default=50, help="columns")
    if grid:
        p.add_argument("--t", type=_ints, default=[20], help="comma-separated block widths")
        p.add_argument("--k", type=_ints, default=[2], help="comma-separated block ranks")
    else:
        p.add_argument("--t", type=int, default=20, help="width of the structured block (first t columns)")
        p.add_argument("--k", type=int, default=2, help="rank of the structured block")
    p.add_argument("--r-rest", type=int, default=4, help="rank of the remaining columns")
    p.add_argument("--mode", choices=("gaussian", "integer"), default="gaussian")
    p.add_argument("--q", type=int, default=1, help="integer mode draws factors from {-q..q}")


def _spec(args, seed: int = 0) -> InstanceSpec:
    return InstanceSpec(args.m, args.n, args.t, args.k, args.r_rest, seed, args.mode, args.q)


def _cmd_gen(args) -> None:
    M, _ = generate(_spec(args, args.seed))
    with _output(args.out) as fh:
        write_matrix_csv(M, fh)


def _cmd_trial(args) -> None:
    keep: dict = {}
    rec = run_trial(
        _spec(args), args.p, args.strategy, args.seed,
        num_relations=args.num_relations, keep=keep,
    )
    doc = rec.as_dict()
    doc = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in doc.items()}
    if "report" in keep:
        doc["solver"] = json.loads(report_to_json(keep["report"], include_matrix=args.include_matrix))
    if args.plan_out and "plan" in keep:
        _write(args.plan_out, plan_to_json(keep["plan"], indent=None) + "\n")
    _write(args.out, json.dumps(doc, indent=2) + "\n")


def _emit_sweep(grid: SweepGrid, args):
    records = run_sweep(grid, workers=args.workers)
    aggs = aggregate(records)
    return records, aggs


def _cmd_sweep(args) -> None:
    grid = SweepGrid(
        args.t, args.k, args.p, args.trials, args.base_seed, args.m, args.n, args.r_rest,
        strategies=args.strategies, num_relations=args.num_relations, mode=args.mode,
    )
    records, aggs = _emit_sweep(grid, args)
    _write(args.out, records_to_csv(records, timing=args.timing))
    if args.aggregate_out:
        _write(args.aggregate_out, aggregates_to_csv(aggs))


def _cmd_figure(args) -> None:
    grid = figure_grid(args.command, trials=args.trials, base_seed=args.base_seed)
    if args.p:
        grid = replace(grid, p_values=tuple(args.p))
    records, aggs = _emit_sweep(grid, args)
    _write(args.out, figure_points(args.command, aggs))
    if args.trials_out:
        _write(args.trials_out, records_to_csv(records, timing=args.timing))
    if args.aggregate_out:
        _write(args.aggregate_out, aggregates_to_csv(aggs))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selective-mc",
        description="Matrix completion under uniform, optimal and selective observation designs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic instance as CSV")
    _add_instance_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("trial", help="run one trial and print a JSON report")
    _add_instance_args(p)
    p.add_argument("--p", type=float, default=0.3, help="observation rate")
    p.add_argument("--strategy", choices=STRATEGIES, default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-relations", type=int, default=None)
    p.add_argument("--include-matrix", action="store_true", help="embed the reconstruction in the report")
    p.add_argument("--plan-out", default=None, help="also write the sampling plan as JSON")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_trial)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--base-seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    common.add_argument("--aggregate-out", default=None, help="per-cell means and gains as CSV")

    p = sub.add_parser("sweep", parents=[common], help="run a (t, k, p) grid and write trial rows as CSV")
    _add_instance_args(p, grid=True)
    p.add_argument("--p", type=_floats, default=[0.3], help="comma-separated observation rates")
    p.add_argument("--strategies", type=_strategies, default=list(STRATEGIES))
    p.add_argument("--num-relations", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_sweep)

    for name, text in (
        ("fig2", "strategy comparison at p = 0.3"),
        ("fig3", "optimal-sampling gain over (t, k)"),
        ("fig4", "error against observation rate for k = 1 and 4"),
    ):
        p = sub.add_parser(name, parents=[common], help=f"{text}; writes one CSV row per plotted point")
        p.add_argument("--p", type=_floats, default=None, help="override the observation rates")
        p.add_argument("--trials-out", default=None, help="also write the per-trial rows")
        p.add_argument("--out", default="-")
        p.set_defaults(func=_cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CompletionError, ValueError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
