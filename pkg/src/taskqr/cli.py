"""Command-line harness for correctness grids, benchmarks and solves.

Subcommands: ``check``, ``sweep``, ``scale``, ``throughput``, ``solve``,
``factor``.  Benchmark subcommands write fixed-schema CSV via ``--out`` and
render the matching figure next to it (suppress with ``--no-fig``, redirect
with ``--fig``).  Exit codes: 0 success, 1 correctness failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, plots
from .graph import build_task_graph, to_dot, validate_graph
from .kernels import ReflectorStore
from .schedulers import EXECUTORS, SchedulerKind, write_trace_csv
from .solver import Factorization, SingularMatrixError, condition_estimate, solve

__all__ = ["main"]


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _size(text: str) -> tuple[int, int]:
    """Parse M or MxN."""
    parts = text.lower().split("x")
    if len(parts) not in (1, 2):
        raise argparse.ArgumentTypeError(f"bad size {text!r}; expected M or MxN")
    dims = [_positive_int(p) for p in parts]
    return (dims[0], dims[0]) if len(dims) == 1 else (dims[0], dims[1])


def _int_list(text: str) -> list[int]:
    """Parse a comma list (1,2,4,8) or an inclusive lo:hi:step range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; expected lo:hi:step")
        lo, hi, step = (_positive_int(p) for p in parts)
        values = list(range(lo, hi + 1, step))
        if not values:
            raise argparse.ArgumentTypeError(f"range {text!r} is empty")
        return values
    return [_positive_int(p) for p in text.split(",")]


def _scheduler(text: str) -> SchedulerKind:
    try:
        return SchedulerKind(text)
    except ValueError:
        names = ", ".join(k.value for k in SchedulerKind)
        raise argparse.ArgumentTypeError(f"unknown scheduler {text!r}; choose from {names}")


def _scheduler_list(text: str) -> list[SchedulerKind]:
    return [_scheduler(p) for p in text.split(",")]


def _default_threads() -> int:
    return min(8, os.cpu_count() or 1)


def _figure_path(args) -> Path | None:
    if getattr(args, "no_fig", False):
        return None
    if args.fig is not None:
        return Path(args.fig)
    if args.out is not None:
        return Path(args.out).with_suffix(".png")
    return None


def _add_output_flags(p: argparse.ArgumentParser, fig: bool = True) -> None:
    p.add_argument("--out", metavar="PATH.csv", help="write results as CSV")
    if fig:
        p.add_argument("--fig", metavar="PATH.png", help="figure path (default: next to --out)")
        p.add_argument("--no-fig", action="store_true", help="skip figure rendering")
    p.add_argument("--no-time", action="store_true",
                   help="zero out timings for byte-stable output")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskqr",
        description="Task-graph scheduled in-place Householder factorization benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="verify every scheduler against the sequential reference")
    p.add_argument("--sizes", type=_int_list, default=[5, 16, 64, 300], metavar="LIST")
    p.add_argument("--alphas", type=_int_list, default=[1, 2, 3, 5, 12], metavar="LIST")
    p.add_argument("--betas", type=_int_list, default=[1, 2, 3, 5, 12], metavar="LIST")
    p.add_argument("--threads-list", type=_int_list, default=[1, 2, 4, 8], metavar="LIST")
    p.add_argument(
        "--schedulers",
        type=_scheduler_list,
        default=[SchedulerKind.BARRIER, SchedulerKind.LOCKFREE, SchedulerKind.PRIORITY],
        metavar="LIST",
    )
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("sweep", help="time the chunk-parameter grid for both dual-queue schedulers")
    p.add_argument("--size", type=_size, default=(512, 512), metavar="M[xN]")
    p.add_argument("--threads", type=_positive_int, default=_default_threads())
    p.add_argument("--alpha-range", type=_int_list, default=list(range(2, 33, 2)), metavar="LO:HI:STEP")
    p.add_argument("--beta-range", type=_int_list, default=list(range(2, 33, 2)), metavar="LO:HI:STEP")
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=1)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("scale", help="time all three parallel schedulers across matrix sizes")
    p.add_argument("--sizes", type=_int_list, default=[300, 512, 1024, 2048], metavar="LIST")
    p.add_argument("--alpha", type=_positive_int, default=12)
    p.add_argument("--beta", type=_positive_int, default=12)
    p.add_argument("--threads", type=_positive_int, default=_default_threads())
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=1)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_scale)

    p = sub.add_parser("throughput", help="time all three parallel schedulers across thread counts")
    p.add_argument("--size", type=_size, default=(1024, 1024), metavar="M[xN]")
    p.add_argument("--alpha", type=_positive_int, default=12)
    p.add_argument("--beta", type=_positive_int, default=12)
    p.add_argument("--threads-range", type=_int_list, default=[1, 2, 4, 8], metavar="LO:HI:STEP")
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=1)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_throughput)

    p = sub.add_parser("solve", help="factorize a generated system and solve it")
    p.add_argument("--size", type=_size, default=(100, 100), metavar="M[xN]")
    p.add_argument("--scheduler", type=_scheduler, default=SchedulerKind.LOCKFREE)
    p.add_argument("--alpha", type=_positive_int, default=12)
    p.add_argument("--beta", type=_positive_int, default=12)
    p.add_argument("--threads", type=_positive_int, default=_default_threads())
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--dominant", action="store_true", help="add m to the diagonal")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("factor", help="time one factorization; optional trace/graph/CSV output")
    p.add_argument("--size", type=_size, default=(300, 300), metavar="M[xN]")
    p.add_argument("--scheduler", type=_scheduler, default=SchedulerKind.LOCKFREE)
    p.add_argument("--alpha", type=_positive_int, default=12)
    p.add_argument("--beta", type=_positive_int, default=12)
    p.add_argument("--threads", type=_positive_int, default=_default_threads())
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--check", action="store_true",
                   help="compare against the sequential reference (exit 1 on mismatch)")
    p.add_argument("--trace", metavar="PATH.csv", help="write an execution trace")
    p.add_argument("--dot", metavar="PATH.dot", help="dump the task graph as DOT")
    _add_output_flags(p, fig=False)
    p.set_defaults(func=_cmd_factor)

    return parser


def _cmd_check(args) -> int:
    count, failures = bench.run_check_grid(
        args.sizes, args.alphas, args.betas, args.threads_list, args.schedulers, args.seed
    )
    if failures:
        f = failures[0]
        print(
            f"MISMATCH: scheduler={f['scheduler']} size={f['size']} alpha={f['alpha']} "
            f"beta={f['beta']} threads={f['threads']}: {f['detail']}"
        )
        return 1
    print(f"checked {count} configurations: all byte-identical to the sequential reference")
    return 0


def _write_report(args, header: str, rows: list[dict], renderer) -> None:
    if args.out:
        bench.write_csv(args.out, header, rows)
        print(f"wrote {args.out}")
    fig = _figure_path(args)
    if fig is not None:
        renderer(rows, fig)
        print(f"wrote {fig}")


def _cmd_sweep(args) -> int:
    m, n = args.size
    if m != n:
        print("sweep requires a square size", file=sys.stderr)
        return 2
    rows = bench.run_sweep(
        m, args.threads, args.alpha_range, args.beta_range, args.reps,
        seed=args.seed, no_time=args.no_time,
    )
    for sched, best in sorted(bench.sweep_argmin(rows).items()):
        print(
            f"{sched}: best alpha={best['alpha']} beta={best['beta']} "
            f"({best['median_seconds']:.6f}s)"
        )
    _write_report(args, bench.SWEEP_HEADER, rows, plots.sweep_heatmap)
    return 0


def _cmd_scale(args) -> int:
    rows = bench.run_scale(
        args.sizes, args.alpha, args.beta, args.threads, args.reps,
        seed=args.seed, no_time=args.no_time,
    )
    for row in rows:
        print(f"{row['scheduler']:9s} size={row['size']:6d} {row['median_seconds']:.6f}s")
    _write_report(args, bench.SCALE_HEADER, rows, plots.scale_lines)
    return 0


def _cmd_throughput(args) -> int:
    m, n = args.size
    if m != n:
        print("throughput requires a square size", file=sys.stderr)
        return 2
    rows = bench.run_throughput(
        m, args.alpha, args.beta, args.threads_range, args.reps,
        seed=args.seed, no_time=args.no_time,
    )
    for row in rows:
        print(f"{row['scheduler']:9s} threads={row['threads']:3d} {row['median_seconds']:.6f}s")
    _write_report(args, bench.THROUGHPUT_HEADER, rows, plots.throughput_lines)
    return 0


def _cmd_solve(args) -> int:
    m, n = args.size
    if m != n:
        print("solve requires a square size", file=sys.stderr)
        return 2
    mat = bench.gen_matrix(m, n, args.seed, dominant=args.dominant)
    rhs = mat @ np.ones(n)
    graph = build_task_graph(m, n, args.alpha, args.beta)
    store = ReflectorStore.empty(graph.grid.p)
    EXECUTORS[args.scheduler](graph, mat, store, args.threads)
    fact = Factorization(mat, store)
    try:
        x = solve(fact, rhs)
    except SingularMatrixError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 1
    max_err = float(np.abs(x - 1.0).max())
    print(f"solved {m}x{n} via {args.scheduler.value}: max |x - 1| = {max_err:.3e} "
          f"(rhs was A @ ones), cond~{condition_estimate(fact):.3e}")
    return 0


def _cmd_factor(args) -> int:
    m, n = args.size
    base = bench.gen_matrix(m, n, args.seed)
    graph = build_task_graph(m, n, args.alpha, args.beta)
    report = validate_graph(graph)
    if not report.ok:
        print(f"graph validation failed: {report.failure}", file=sys.stderr)
        return 1
    if args.dot:
        Path(args.dot).write_text(to_dot(graph), encoding="utf-8")
        print(f"wrote {args.dot}")
    median, correct = bench.timed_runs(
        base, graph, args.scheduler, args.threads, args.reps, check=args.check
    )
    if args.no_time:
        median = 0.0
    # one extra untimed run supplies the trace and the condition estimate
    mat = base.copy()
    store = ReflectorStore.empty(graph.grid.p)
    run = EXECUTORS[args.scheduler](graph, mat, store, args.threads, trace=bool(args.trace))
    if args.trace:
        write_trace_csv(args.trace, run.trace)
        print(f"wrote {args.trace} ({len(run.trace)} tasks)")
    cond = condition_estimate(Factorization(mat, store))
    flag = "" if correct is None else f" correct={str(correct).lower()}"
    print(
        f"{args.scheduler.value} {m}x{n} alpha={args.alpha} beta={args.beta} "
        f"threads={args.threads}: median {median:.6f}s over {args.reps} reps{flag} "
        f"cond~{cond:.3e}"
    )
    if args.out:
        rec = bench.BenchRecord(
            scheduler=args.scheduler.value, m=m, n=n, alpha=args.alpha, beta=args.beta,
            threads=args.threads, seed=args.seed, reps=args.reps,
            median_seconds=median, correct=correct,
        )
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(bench.BENCH_HEADER + "\n")
            fh.write(bench.bench_record_row(rec) + "\n")
        print(f"wrote {args.out}")
    if args.check and not correct:
        return 1
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
