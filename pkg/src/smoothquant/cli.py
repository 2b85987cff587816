"""Command line interface.

Subcommands: run, solve-steps, smoothness, encode-bench, plot.
Exit codes: 0 success, 1 a run diverged, 2 usage/config/data errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import SmoothQuantError
from .harness import (
    encode_bench,
    format_summary,
    load_dataset,
    parse_config,
    run_experiment,
)
from .problems import LogisticProblem, heterogeneous_split
from .smoothness import global_factor, heterogeneity
from .step_solver import (
    solve_block_dcgd,
    solve_block_diana,
    solve_varying_dcgd,
    solve_varying_diana,
)
from .compressors import certify, BlockQuantizer, VaryingStepQuantizer
from .plotting import X_AXES, emit_svg_plot
from .traces import Trace


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothquant",
        description="Smoothness-aware compressed distributed gradient methods",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the sweep described by a config file")
    run_p.add_argument("config", help="path to a key = value config file")

    steps_p = sub.add_parser("solve-steps", help="optimal quantization steps per worker")
    steps_p.add_argument("--dataset", required=True)
    steps_p.add_argument("--n", type=int, required=True)
    steps_p.add_argument("--l2", type=float, default=1e-3)
    steps_p.add_argument("--beta", type=float, required=True)
    steps_p.add_argument(
        "--mode",
        required=True,
        choices=("block-dcgd", "block-diana", "varying-dcgd", "varying-diana"),
    )
    steps_p.add_argument("--blocks", type=int, default=None, help="block count for block modes")

    smooth_p = sub.add_parser("smoothness", help="worker factors and heterogeneity stats")
    smooth_p.add_argument("--dataset", required=True)
    smooth_p.add_argument("--n", type=int, required=True)
    smooth_p.add_argument("--l2", type=float, default=1e-3)

    bench_p = sub.add_parser("encode-bench", help="payload size vs the ||h^-1|| proxy")
    bench_p.add_argument("--dim", type=int, default=50)
    bench_p.add_argument("--trials", type=int, default=1000)
    bench_p.add_argument("--seed", type=int, default=0)
    bench_p.add_argument("--level-coding", default="unary", choices=("unary", "elias"))

    plot_p = sub.add_parser("plot", help="render trace CSVs as an SVG")
    plot_p.add_argument("--x-axis", default="iters", choices=X_AXES)
    plot_p.add_argument("--out", required=True)
    plot_p.add_argument("csvs", nargs="+")
    return parser


def _load_problems(dataset_spec: str, n: int, l2: float) -> list[LogisticProblem]:
    dataset = load_dataset(dataset_spec)
    shards = heterogeneous_split(dataset, n)
    return [LogisticProblem(sh.rows, sh.labels, l2) for sh in shards]


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    summary = run_experiment(config)
    print(format_summary(summary))
    return 1 if summary["diverged"] else 0


def _cmd_solve_steps(args) -> int:
    problems = _load_problems(args.dataset, args.n, args.l2)
    d = problems[0].dim
    block = args.mode.startswith("block")
    count = args.blocks if args.blocks is not None else min(args.n, d)
    base, extra = divmod(d, count) if block else (0, 0)
    sizes = [base + (1 if i < extra else 0) for i in range(count)] if block else None

    workers = []
    for problem in problems:
        factor = problem.factor
        if args.mode == "block-dcgd":
            sol = solve_block_dcgd(factor, sizes, args.beta)
        elif args.mode == "block-diana":
            sol = solve_block_diana(factor, sizes, args.beta, args.n, args.l2)
        elif args.mode == "varying-dcgd":
            sol = solve_varying_dcgd(factor, args.beta)
        else:
            sol = solve_varying_diana(factor, args.beta, args.n, args.l2)
        if block:
            starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
            quantizer = BlockQuantizer(sizes, sol.steps[starts])
        else:
            quantizer = VaryingStepQuantizer(sol.steps)
        cert = certify(quantizer, factor)
        workers.append(
            {
                "steps": [float(h) for h in sol.steps],
                "objective": sol.objective_value,
                "delta": sol.delta,
                "omega": cert.omega_bound,
                "calL": cert.calL_bound,
            }
        )
    print(
        json.dumps(
            {"mode": args.mode, "beta": args.beta, "blocks": sizes, "workers": workers},
            indent=2,
        )
    )
    return 0


def _cmd_smoothness(args) -> int:
    problems = _load_problems(args.dataset, args.n, args.l2)
    factors = [p.factor for p in problems]
    stats = heterogeneity(factors)
    payload = {
        "workers": [
            {
                "lambda_max": fac.lambda_max,
                "rank": fac.rank,
                "diag": [float(v) for v in fac.diag],
            }
            for fac in factors
        ],
        "global_lambda_max": global_factor(factors).lambda_max,
        "nu": stats.nu,
        "nu1": stats.nu1,
        "l_max": stats.l_max,
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_encode_bench(args) -> int:
    result = encode_bench(args.dim, args.trials, args.seed, args.level_coding)
    print(f"{'trial':>6} {'h_inv_norm':>14} {'mean_bits':>12}")
    for row in result["rows"]:
        print(f"{row['trial']:>6} {row['h_inv_norm']:>14.4f} {row['mean_bits']:>12.1f}")
    r = result["pearson_r"]
    print(f"pairs {result['pairs']}")
    print(f"pearson_r {'n/a' if r is None else f'{r:.4f}'}")
    return 0


def _cmd_plot(args) -> int:
    traces = [Trace.from_csv(path) for path in args.csvs]
    for trace in traces:
        stem = trace.meta.get("path", "trace").rsplit("/", 1)[-1]
        trace.meta["label"] = stem.removesuffix(".csv")
    emit_svg_plot(traces, args.x_axis, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "solve-steps": _cmd_solve_steps,
        "smoothness": _cmd_smoothness,
        "encode-bench": _cmd_encode_bench,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except SmoothQuantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
