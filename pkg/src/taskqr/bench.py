"""Benchmark harness: deterministic inputs, timed runs, correctness grids.

Timing discipline: the monotonic clock brackets the executor call only;
matrix generation, copying and any correctness comparison stay outside the
timed window.  Each configuration gets one untimed warm-up run, then the
median over ``reps`` timed runs is reported.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from . import _jit
from .graph import TaskGraph, build_task_graph
from .kernels import ReflectorStore, require_matrix, sequential_factorize
from .schedulers import EXECUTORS, SchedulerKind

__all__ = [
    "gen_matrix",
    "BenchRecord",
    "BENCH_HEADER",
    "SWEEP_HEADER",
    "SCALE_HEADER",
    "THROUGHPUT_HEADER",
    "bench_record_row",
    "oracle_factorization",
    "first_mismatch",
    "timed_runs",
    "run_check_grid",
    "run_sweep",
    "sweep_argmin",
    "run_scale",
    "run_throughput",
    "write_csv",
]

# SplitMix64 finalizer constants
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def gen_matrix(m: int, n: int, seed: int, dominant: bool = False) -> np.ndarray:
    """Deterministic test matrix with entries uniform in [-1, 1).

    Entry ``k`` (row-major) is derived from the SplitMix64 finalizer applied
    to ``seed + (k+1) * 0x9E3779B97F4A7C15`` (all arithmetic mod 2^64), with
    the top 53 bits mapped to a float in [0, 1).  Pure integer mixing plus
    one exact float conversion, so identical seeds give identical bytes on
    every platform.  ``dominant`` adds ``m`` to the diagonal, which makes
    the matrix comfortably non-singular for solve experiments.
    """
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    idx = np.arange(1, m * n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GAMMA
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
    mat = (2.0 * u - 1.0).reshape(m, n)
    if dominant:
        p = min(m, n)
        mat[np.arange(p), np.arange(p)] += float(m)
    return mat


@dataclass
class BenchRecord:
    """One timed configuration; ``correct`` is None when the run was not
    checked against the sequential reference."""

    scheduler: str
    m: int
    n: int
    alpha: int
    beta: int
    threads: int
    seed: int
    reps: int
    median_seconds: float
    correct: bool | None = None


BENCH_HEADER = "scheduler,m,n,alpha,beta,threads,seed,reps,median_seconds,correct"
SWEEP_HEADER = "scheduler,alpha,beta,median_seconds"
SCALE_HEADER = "scheduler,size,median_seconds"
THROUGHPUT_HEADER = "scheduler,threads,median_seconds"


def _fmt_seconds(x: float) -> str:
    return f"{x:.6f}"


def bench_record_row(rec: BenchRecord) -> str:
    correct = "" if rec.correct is None else str(rec.correct).lower()
    return (
        f"{rec.scheduler},{rec.m},{rec.n},{rec.alpha},{rec.beta},{rec.threads},"
        f"{rec.seed},{rec.reps},{_fmt_seconds(rec.median_seconds)},{correct}"
    )


def oracle_factorization(mat: np.ndarray) -> tuple[np.ndarray, ReflectorStore]:
    """Sequential reference factorization on a copy of ``mat``."""
    ref = mat.copy()
    store = sequential_factorize(ref)
    return ref, store


def first_mismatch(
    mat: np.ndarray,
    store: ReflectorStore,
    ref_mat: np.ndarray,
    ref_store: ReflectorStore,
) -> str | None:
    """Byte-level comparison against the reference; returns a description of
    the first difference, or None when identical."""
    if mat.tobytes() != ref_mat.tobytes():
        flat = np.flatnonzero(mat.ravel() != ref_mat.ravel())
        i = int(flat[0])
        return f"matrix element {i} (row {i // mat.shape[1]}, col {i % mat.shape[1]}) differs"
    for name, got, want in (("up", store.up, ref_store.up), ("b", store.b, ref_store.b)):
        if got.tobytes() != want.tobytes():
            i = int(np.flatnonzero(got != want)[0])
            return f"{name}[{i}] differs"
    if not np.array_equal(store.defined, ref_store.defined):
        i = int(np.flatnonzero(store.defined != ref_store.defined)[0])
        return f"defined[{i}] differs"
    return None


def timed_runs(
    base: np.ndarray,
    graph: TaskGraph,
    kind: SchedulerKind,
    threads: int,
    reps: int,
    warmup: int = 1,
    check: bool = False,
    oracle: tuple[np.ndarray, ReflectorStore] | None = None,
) -> tuple[float, bool | None]:
    """Median wall time of ``reps`` factorizations; optional byte comparison
    against the sequential reference (computed here if not supplied)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    require_matrix(base)
    _jit.warmup()
    runner = EXECUTORS[kind]
    times = []
    mat = store = None
    for rep in range(-warmup, reps):
        mat = base.copy()
        store = ReflectorStore.empty(graph.grid.p)
        t0 = time.perf_counter()
        runner(graph, mat, store, threads, validate=False)
        elapsed = time.perf_counter() - t0
        if rep >= 0:
            times.append(elapsed)
    correct = None
    if check:
        if oracle is None:
            oracle = oracle_factorization(base)
        correct = first_mismatch(mat, store, *oracle) is None
    return statistics.median(times), correct


def run_check_grid(
    sizes: list[int],
    alphas: list[int],
    betas: list[int],
    threads_list: list[int],
    schedulers: list[SchedulerKind],
    seed: int,
) -> tuple[int, list[dict]]:
    """Run every configuration once and compare byte-for-byte against the
    sequential reference.  Returns (configurations run, mismatches)."""
    _jit.warmup()
    failures: list[dict] = []
    count = 0
    for size in sizes:
        base = gen_matrix(size, size, seed)
        oracle = oracle_factorization(base)
        for alpha in alphas:
            for beta in betas:
                graph = build_task_graph(size, size, alpha, beta)
                for kind in schedulers:
                    runner = EXECUTORS[kind]
                    for threads in threads_list:
                        mat = base.copy()
                        store = ReflectorStore.empty(graph.grid.p)
                        runner(graph, mat, store, threads, validate=False)
                        count += 1
                        diff = first_mismatch(mat, store, *oracle)
                        if diff is not None:
                            failures.append(
                                {
                                    "scheduler": kind.value,
                                    "size": size,
                                    "alpha": alpha,
                                    "beta": beta,
                                    "threads": threads,
                                    "detail": diff,
                                }
                            )
    return count, failures


def run_sweep(
    size: int,
    threads: int,
    alphas: list[int],
    betas: list[int],
    reps: int,
    seed: int = 1,
    no_time: bool = False,
) -> list[dict]:
    """Chunk-parameter sweep for the two dual-queue schedulers."""
    base = gen_matrix(size, size, seed)
    rows = []
    for kind in (SchedulerKind.LOCKFREE, SchedulerKind.PRIORITY):
        for alpha in alphas:
            for beta in betas:
                graph = build_task_graph(size, size, alpha, beta)
                med, _ = timed_runs(base, graph, kind, threads, reps)
                rows.append(
                    {
                        "scheduler": kind.value,
                        "alpha": alpha,
                        "beta": beta,
                        "median_seconds": 0.0 if no_time else med,
                    }
                )
    return rows


def sweep_argmin(rows: list[dict]) -> dict[str, dict]:
    best: dict[str, dict] = {}
    for row in rows:
        cur = best.get(row["scheduler"])
        if cur is None or row["median_seconds"] < cur["median_seconds"]:
            best[row["scheduler"]] = row
    return best


def run_scale(
    sizes: list[int],
    alpha: int,
    beta: int,
    threads: int,
    reps: int,
    seed: int = 1,
    no_time: bool = False,
) -> list[dict]:
    """Execution time versus matrix size for all three parallel schedulers."""
    rows = []
    for size in sizes:
        base = gen_matrix(size, size, seed)
        graph = build_task_graph(size, size, alpha, beta)
        for kind in (SchedulerKind.BARRIER, SchedulerKind.LOCKFREE, SchedulerKind.PRIORITY):
            med, _ = timed_runs(base, graph, kind, threads, reps)
            rows.append(
                {
                    "scheduler": kind.value,
                    "size": size,
                    "median_seconds": 0.0 if no_time else med,
                }
            )
    return rows


def run_throughput(
    size: int,
    alpha: int,
    beta: int,
    threads_list: list[int],
    reps: int,
    seed: int = 1,
    no_time: bool = False,
) -> list[dict]:
    """Execution time versus worker count at a fixed size."""
    base = gen_matrix(size, size, seed)
    graph = build_task_graph(size, size, alpha, beta)
    rows = []
    for kind in (SchedulerKind.BARRIER, SchedulerKind.LOCKFREE, SchedulerKind.PRIORITY):
        for threads in threads_list:
            med, _ = timed_runs(base, graph, kind, threads, reps)
            rows.append(
                {
                    "scheduler": kind.value,
                    "threads": threads,
                    "median_seconds": 0.0 if no_time else med,
                }
            )
    return rows


def write_csv(path, header: str, rows: list[dict]) -> None:
    """Write rows in the column order named by ``header``; float cells are
    fixed to six decimals so output bytes are stable for identical inputs."""
    cols = header.split(",")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            cells = []
            for col in cols:
                val = row[col]
                cells.append(_fmt_seconds(val) if isinstance(val, float) else str(val))
            fh.write(",".join(cells) + "\n")
