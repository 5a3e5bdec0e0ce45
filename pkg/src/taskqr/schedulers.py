"""Executors that drive a task graph against a matrix.

Four strategies share the same task bodies and therefore produce
byte-identical matrices and reflector stores:

* ``run_sequential`` — one thread, fixed topological order; the reference.
* ``run_barrier``    — level-synchronous: one worker computes each diagonal
  task while the rest wait, then the level's trailing tasks are split across
  workers between two rendezvous points.
* ``run_lockfree``   — dual-queue workers: a main queue of ready tasks and a
  wait queue for tasks released before all their parents finished.
* ``run_priority``   — same loop, but the main queue pops the ready task
  with the greatest bottom-level first.

Thread safety rests on three things: tasks with overlapping row ranges are
ordered by the graph, completion flags are published before children are
enqueued, and the queues are linearizable.  Kernels never lock.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from . import _jit
from .graph import TaskGraph, TaskId, TaskKind, TaskNode, build_task_graph
from .kernels import ReflectorStore, require_matrix

__all__ = [
    "SchedulerKind",
    "SchedulerConfig",
    "DependencyTable",
    "RunReport",
    "TraceEvent",
    "SchedulerStalledError",
    "run_task1",
    "run_task2",
    "run_sequential",
    "run_barrier",
    "run_lockfree",
    "run_priority",
    "execute",
    "factorize",
    "EXECUTORS",
    "write_trace_csv",
]


class SchedulerKind(Enum):
    SEQUENTIAL = "seq"
    BARRIER = "barrier"
    LOCKFREE = "lockfree"
    PRIORITY = "priority"


@dataclass
class SchedulerConfig:
    kind: SchedulerKind
    threads: int = 1
    alpha: int = 1
    beta: int = 1


class SchedulerStalledError(RuntimeError):
    """No completion for longer than the watchdog allows; the message
    carries a queue and flag dump for diagnosis."""


class TraceEvent(NamedTuple):
    worker: int
    task: str
    start_ns: int
    end_ns: int


@dataclass
class RunReport:
    """Execution statistics; the counter fields are only populated when the
    run was instrumented."""

    tasks_executed: int = 0
    rendezvous: int = 0
    main_queue_pushes: Counter | None = None
    flag_sets: Counter | None = None
    execution_order: list[TaskId] | None = None
    trace: list[TraceEvent] | None = None


class DependencyTable:
    """Write-once completion flags plus an O(1) all-done signal.

    Flag stores are plain list writes published under the interpreter lock.
    Completions are counted through an atomic iterator, so termination is a
    single event check with no lock on the completion path.
    """

    def __init__(self, size: int):
        self.done = [False] * size
        self.total = size
        self.all_done = threading.Event()
        self._ticket = itertools.count(1)

    @property
    def completed(self) -> int:
        return sum(self.done)

    def mark_done(self, index: int) -> None:
        if self.done[index]:
            raise AssertionError(f"completion flag {index} set twice")
        self.done[index] = True
        if next(self._ticket) == self.total:
            self.all_done.set()


class _FifoQueue:
    """MPMC FIFO; deque append/popleft are single atomic operations."""

    def __init__(self):
        self._q: deque[int] = deque()

    def push(self, item: int) -> None:
        self._q.append(item)

    def pop(self) -> int | None:
        # unlocked emptiness peek: a miss is caught on the next iteration
        if not self._q:
            return None
        try:
            return self._q.popleft()
        except IndexError:
            return None

    def snapshot(self) -> list[int]:
        return list(self._q)


class _PriorityQueue:
    """MPMC max-priority queue: a binary heap under a short mutex.

    Entries are (-priority, node index); the node index doubles as the
    deterministic tie-break (diagonal first, then pivot block, then row
    block).
    """

    def __init__(self, priorities: list[int]):
        self._prio = priorities
        self._heap: list[tuple[int, int]] = []
        self._lock = threading.Lock()

    def push(self, item: int) -> None:
        with self._lock:
            heapq.heappush(self._heap, (-self._prio[item], item))

    def pop(self) -> int | None:
        if not self._heap:
            return None
        with self._lock:
            if not self._heap:
                return None
            return heapq.heappop(self._heap)[1]

    def snapshot(self) -> list[int]:
        with self._lock:
            return [item for _, item in sorted(self._heap)]


class _RowLease:
    """Debug-only overlap detector: while a task runs it holds a lease on
    its writable row range; two live leases must never intersect."""

    def __init__(self):
        self._active: dict[int, tuple[int, int]] = {}
        self._lock = threading.Lock()

    def acquire(self, index: int, row_start: int, row_end: int) -> None:
        with self._lock:
            for other, (rs, re) in self._active.items():
                if row_start < re and rs < row_end:
                    raise AssertionError(
                        f"overlapping writable rows: task {index} [{row_start},{row_end}) "
                        f"vs task {other} [{rs},{re})"
                    )
            self._active[index] = (row_start, row_end)

    def release(self, index: int) -> None:
        with self._lock:
            del self._active[index]


def run_task1(mat: np.ndarray, store: ReflectorStore, node: TaskNode) -> None:
    """Execute one diagonal task: its pivot block plus the trailing updates
    inside the task's own row range."""
    if node.id.kind != TaskKind.DIAGONAL:
        raise ValueError(f"{node.id.name()} is not a diagonal task")
    _jit.task1_body(
        mat, store.up, store.b, store.defined, node.pivot_start, node.pivot_end, node.row_end
    )


def run_task2(mat: np.ndarray, store: ReflectorStore, node: TaskNode) -> None:
    """Execute one trailing task: apply the node's pivot block (published
    reflector scalars plus in-row tails) to its row block."""
    if node.id.kind != TaskKind.TRAILING:
        raise ValueError(f"{node.id.name()} is not a trailing task")
    _jit.task2_body(
        mat,
        store.up,
        store.b,
        store.defined,
        node.pivot_start,
        node.pivot_end,
        node.row_start,
        node.row_end,
    )


def _execute_node(mat: np.ndarray, store: ReflectorStore, node: TaskNode) -> None:
    if node.id.kind == TaskKind.DIAGONAL:
        _jit.task1_body(
            mat, store.up, store.b, store.defined, node.pivot_start, node.pivot_end, node.row_end
        )
    else:
        _jit.task2_body(
            mat,
            store.up,
            store.b,
            store.defined,
            node.pivot_start,
            node.pivot_end,
            node.row_start,
            node.row_end,
        )


def _check_inputs(graph: TaskGraph, mat: np.ndarray, store: ReflectorStore, validate: bool) -> None:
    if validate:
        require_matrix(mat)
        if mat.shape != (graph.grid.m, graph.grid.n):
            raise ValueError(
                f"matrix shape {mat.shape} does not match graph geometry "
                f"({graph.grid.m}, {graph.grid.n})"
            )
        if store.pivot_count != graph.grid.p:
            raise ValueError("reflector store sized for a different pivot count")


def run_sequential(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    threads: int = 1,
    *,
    instrument: bool = False,
    trace: bool = False,
    validate: bool = True,
    watchdog_seconds: float = 30.0,
) -> RunReport:
    """Execute every task on the calling thread in priority-descending order
    (a topological order, since priorities strictly decrease along edges)."""
    _check_inputs(graph, mat, store, validate)
    report = RunReport(execution_order=[] if instrument else None, trace=[] if trace else None)
    for node in graph.schedule_order:
        t0 = time.perf_counter_ns() if trace else 0
        _execute_node(mat, store, node)
        if trace:
            report.trace.append(TraceEvent(0, node.id.name(), t0, time.perf_counter_ns()))
        if instrument:
            report.execution_order.append(node.id)
        report.tasks_executed += 1
    return report


class _WorkerPool:
    """Shared bookkeeping for the threaded executors: error collection,
    stall detection and per-worker instrumentation merge."""

    def __init__(self, threads: int, total: int, watchdog_seconds: float):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self.total = total
        self.watchdog_seconds = watchdog_seconds
        self.stop = threading.Event()
        self.errors: list[BaseException] = []
        self.last_progress = time.monotonic()
        self._error_lock = threading.Lock()

    def touch(self) -> None:
        self.last_progress = time.monotonic()

    def stalled(self) -> bool:
        return (
            self.watchdog_seconds > 0
            and time.monotonic() - self.last_progress > self.watchdog_seconds
        )

    def fail(self, exc: BaseException) -> None:
        with self._error_lock:
            self.errors.append(exc)
        self.stop.set()

    def run(self, worker: Callable[[int], None]) -> None:
        ts = [
            threading.Thread(target=self._guard, args=(worker, wid), daemon=True)
            for wid in range(self.threads)
        ]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        if self.errors:
            raise self.errors[0]

    def _guard(self, worker: Callable[[int], None], wid: int) -> None:
        try:
            worker(wid)
        except BaseException as exc:  # propagate to the caller after join
            self.fail(exc)


def _idle_backoff(rounds: int) -> None:
    # yield first, then brief sleeps; idle workers must leave the cores to
    # the ones holding actual work, especially when oversubscribed
    if rounds < 4:
        time.sleep(0)
    elif rounds < 64:
        time.sleep(0.00005)
    else:
        time.sleep(0.0002)


class _SpinBarrier:
    """Rendezvous that yields instead of parking on a condition variable.

    Workers here hold no locks while blocked and wake within one scheduling
    quantum of the last arrival, which keeps per-level synchronization cheap
    even when worker count exceeds core count.  Same wait/abort surface as
    ``threading.Barrier`` as far as the executor needs.
    """

    def __init__(self, parties: int, action=None):
        self.parties = parties
        self.action = action
        self.count = 0
        self.generation = 0
        self.broken = False
        self._lock = threading.Lock()

    def wait(self, timeout: float | None = None) -> None:
        with self._lock:
            gen = self.generation
            self.count += 1
            if self.count == self.parties:
                if self.action is not None:
                    self.action()
                self.count = 0
                self.generation = gen + 1
                return
        deadline = None if timeout is None else time.monotonic() + timeout
        spins = 0
        while self.generation == gen:
            if self.broken:
                raise threading.BrokenBarrierError
            spins += 1
            if spins < 4:
                time.sleep(0)
            elif spins < 32:
                time.sleep(0.00002)
            else:
                time.sleep(0.0001)
            if deadline is not None and time.monotonic() > deadline:
                self.broken = True
                raise threading.BrokenBarrierError

    def abort(self) -> None:
        self.broken = True


def _stall_dump(
    graph: TaskGraph, table: DependencyTable, main_queue, wait_queue
) -> str:
    order = graph.order
    pending = [order[i].id.name() for i, d in enumerate(table.done) if not d][:20]
    return (
        f"no task completed within the watchdog interval: "
        f"{table.completed}/{len(order)} done; "
        f"main_queue={[order[i].id.name() for i in main_queue.snapshot()[:20]]}; "
        f"wait_queue={[order[i].id.name() for i in wait_queue.snapshot()[:20]]}; "
        f"pending={pending}"
    )


def _dual_queue_run(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    threads: int,
    main_queue,
    *,
    instrument: bool,
    trace: bool,
    watchdog_seconds: float,
) -> RunReport:
    order = graph.order
    total = len(order)
    table = DependencyTable(total)
    wait_queue = _FifoQueue()
    pool = _WorkerPool(threads, total, watchdog_seconds)
    lease = _RowLease() if instrument else None

    per_worker_pushes: list[Counter] = [Counter() for _ in range(threads)]
    per_worker_flags: list[Counter] = [Counter() for _ in range(threads)]
    per_worker_order: list[list[TaskId]] = [[] for _ in range(threads)]
    per_worker_trace: list[list[TraceEvent]] = [[] for _ in range(threads)]
    executed = [0] * threads
    # each slot is written only by its own worker; peers read it to decide
    # whether spinning would steal cores from real work
    executing = [False] * threads

    root_index = graph.nodes[graph.root].index
    main_queue.push(root_index)
    if instrument:
        per_worker_pushes[0][graph.root] += 1

    def worker(wid: int) -> None:
        # everything the loop touches is hoisted to locals: with tens of
        # thousands of micro-tasks per run, attribute lookups dominate
        done = table.done
        mark = table.mark_done
        all_done = table.all_done
        stop = pool.stop
        touch = pool.touch
        main_pop, main_push = main_queue.pop, main_queue.push
        wait_pop, wait_push = wait_queue.pop, wait_queue.push
        up_arr, b_arr, def_arr = store.up, store.b, store.defined
        task1, task2 = _jit.task1_body, _jit.task2_body
        pushes = per_worker_pushes[wid]
        my_trace = per_worker_trace[wid]
        my_order = per_worker_order[wid]
        count = 0
        idle_rounds = 0
        while True:
            index = main_pop()
            if index is not None:
                idle_rounds = 0
                node = order[index]
                diag, ps, pe, rs, re = node.params
                t0 = time.perf_counter_ns() if trace else 0
                if lease is not None:
                    lease.acquire(index, rs, re)
                executing[wid] = True
                if diag:
                    task1(mat, up_arr, b_arr, def_arr, ps, pe, re)
                else:
                    task2(mat, up_arr, b_arr, def_arr, ps, pe, rs, re)
                executing[wid] = False
                if lease is not None:
                    lease.release(index)
                mark(index)
                touch()
                if trace:
                    my_trace.append(TraceEvent(wid, node.id.name(), t0, time.perf_counter_ns()))
                if instrument:
                    my_order.append(node.id)
                    per_worker_flags[wid][node.id] += 1
                count += 1
                for child_index in node.release_indexes:
                    child = order[child_index]
                    ready = True
                    for p in child.parent_indexes:
                        if not done[p]:
                            ready = False
                            break
                    if ready:
                        main_push(child_index)
                        if instrument:
                            pushes[child.id] += 1
                    else:
                        wait_push(child_index)
            deferred = wait_pop()
            if deferred is not None:
                node = order[deferred]
                ready = True
                for p in node.parent_indexes:
                    if not done[p]:
                        ready = False
                        break
                if ready:
                    main_push(deferred)
                    idle_rounds = 0
                    if instrument:
                        pushes[node.id] += 1
                else:
                    wait_push(deferred)
            if all_done.is_set() or stop.is_set():
                executed[wid] = count
                return
            if index is None:
                if pool.stalled():
                    executed[wid] = count
                    raise SchedulerStalledError(_stall_dump(graph, table, main_queue, wait_queue))
                if deferred is not None and not any(executing):
                    # nobody is computing, so rotating the wait queue is the
                    # only way forward; keep it hot
                    time.sleep(0)
                else:
                    # back off so busy peers keep the cores
                    idle_rounds += 1
                    _idle_backoff(idle_rounds)

    pool.run(worker)

    report = RunReport(tasks_executed=sum(executed))
    if instrument:
        report.main_queue_pushes = sum(per_worker_pushes, Counter())
        report.flag_sets = sum(per_worker_flags, Counter())
        if threads == 1:
            report.execution_order = per_worker_order[0]
    if trace:
        report.trace = sorted(
            itertools.chain.from_iterable(per_worker_trace), key=lambda e: e.start_ns
        )
    return report


def run_lockfree(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    threads: int,
    *,
    instrument: bool = False,
    trace: bool = False,
    validate: bool = True,
    watchdog_seconds: float = 30.0,
) -> RunReport:
    """Dual-queue execution with a FIFO main queue.

    Each worker pops a ready task, executes it, publishes its flag, then
    routes every task it releases: straight to the main queue when all of
    the child's parents are done, otherwise to the wait queue.  One deferred
    task is re-examined per loop iteration.  Workers terminate when the
    completion count reaches the node count; a configurable watchdog turns
    a stall (a scheduling defect) into a diagnostic abort.
    """
    _check_inputs(graph, mat, store, validate)
    return _dual_queue_run(
        graph,
        mat,
        store,
        threads,
        _FifoQueue(),
        instrument=instrument,
        trace=trace,
        watchdog_seconds=watchdog_seconds,
    )


def run_priority(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    threads: int,
    *,
    instrument: bool = False,
    trace: bool = False,
    validate: bool = True,
    watchdog_seconds: float = 30.0,
) -> RunReport:
    """Same contract as :func:`run_lockfree` but the main queue always pops
    the ready task with the greatest bottom-level, so the critical chain is
    serviced first."""
    _check_inputs(graph, mat, store, validate)
    priorities = [node.priority for node in graph.order]
    return _dual_queue_run(
        graph,
        mat,
        store,
        threads,
        _PriorityQueue(priorities),
        instrument=instrument,
        trace=trace,
        watchdog_seconds=watchdog_seconds,
    )


def run_barrier(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    threads: int,
    *,
    instrument: bool = False,
    trace: bool = False,
    validate: bool = True,
    watchdog_seconds: float = 30.0,
) -> RunReport:
    """Level-synchronous execution with two rendezvous per pivot block: one
    after the diagonal task, one after the level's trailing tasks.  The
    trailing set is split across workers by contiguous index ranges."""
    _check_inputs(graph, mat, store, validate)
    grid = graph.grid
    levels = len(grid.pivot_blocks)
    diag = [graph.nodes[TaskId(TaskKind.DIAGONAL, i, -1)] for i in range(levels)]
    trailing: list[list[TaskNode]] = [[] for _ in range(levels)]
    for node in graph.order:
        if node.id.kind == TaskKind.TRAILING:
            trailing[node.id.pivot_block].append(node)

    rendezvous = [0]

    def count_cycle():
        rendezvous[0] += 1

    barrier = _SpinBarrier(threads, action=count_cycle)
    pool = _WorkerPool(threads, len(graph), watchdog_seconds)
    per_worker_trace: list[list[TraceEvent]] = [[] for _ in range(threads)]
    executed = [0] * threads
    timeout = watchdog_seconds if watchdog_seconds > 0 else None

    def worker(wid: int) -> None:
        up_arr, b_arr, def_arr = store.up, store.b, store.defined
        task1, task2 = _jit.task1_body, _jit.task2_body
        my_trace = per_worker_trace[wid]
        my_count = 0

        def run_node(node: TaskNode) -> None:
            nonlocal my_count
            diag_flag, ps, pe, rs, re = node.params
            t0 = time.perf_counter_ns() if trace else 0
            if diag_flag:
                task1(mat, up_arr, b_arr, def_arr, ps, pe, re)
            else:
                task2(mat, up_arr, b_arr, def_arr, ps, pe, rs, re)
            if trace:
                my_trace.append(TraceEvent(wid, node.id.name(), t0, time.perf_counter_ns()))
            my_count += 1

        try:
            for level in range(levels):
                if wid == 0:
                    run_node(diag[level])
                barrier.wait(timeout)
                tasks = trailing[level]
                share, rem = divmod(len(tasks), threads)
                lo = wid * share + min(wid, rem)
                hi = lo + share + (1 if wid < rem else 0)
                for node in tasks[lo:hi]:
                    run_node(node)
                barrier.wait(timeout)
            executed[wid] = my_count
        except threading.BrokenBarrierError:
            executed[wid] = my_count
            # broken either by a peer's failure (stop already set) or by a
            # rendezvous timeout, which is a stall
            if not pool.stop.is_set():
                raise SchedulerStalledError(
                    f"rendezvous timed out after {watchdog_seconds}s at the barrier"
                ) from None
        except BaseException:
            pool.stop.set()
            barrier.abort()
            raise

    pool.run(worker)

    report = RunReport(tasks_executed=sum(executed), rendezvous=rendezvous[0])
    if trace:
        report.trace = sorted(
            itertools.chain.from_iterable(per_worker_trace), key=lambda e: e.start_ns
        )
    return report


EXECUTORS: dict[SchedulerKind, Callable] = {
    SchedulerKind.SEQUENTIAL: run_sequential,
    SchedulerKind.BARRIER: run_barrier,
    SchedulerKind.LOCKFREE: run_lockfree,
    SchedulerKind.PRIORITY: run_priority,
}


def execute(
    graph: TaskGraph,
    mat: np.ndarray,
    store: ReflectorStore,
    config: SchedulerConfig,
    **kwargs,
) -> RunReport:
    """Dispatch to the executor named by ``config.kind``."""
    runner = EXECUTORS[config.kind]
    return runner(graph, mat, store, config.threads, **kwargs)


def factorize(
    mat: np.ndarray,
    *,
    kind: SchedulerKind | str = SchedulerKind.SEQUENTIAL,
    alpha: int = 1,
    beta: int = 1,
    threads: int = 1,
    graph: TaskGraph | None = None,
    **kwargs,
) -> tuple[ReflectorStore, RunReport]:
    """Factorize ``mat`` in place under the chosen scheduler and return the
    reflector store plus the run report."""
    kind = SchedulerKind(kind) if not isinstance(kind, SchedulerKind) else kind
    if graph is None:
        graph = build_task_graph(mat.shape[0], mat.shape[1], alpha, beta)
    store = ReflectorStore.empty(graph.grid.p)
    report = EXECUTORS[kind](graph, mat, store, threads, **kwargs)
    return store, report


def write_trace_csv(path, events: list[TraceEvent]) -> None:
    """Write an execution trace as CSV: worker, task, start/end monotonic ns."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("worker,task,start_ns,end_ns\n")
        for ev in events:
            fh.write(f"{ev.worker},{ev.task},{ev.start_ns},{ev.end_ns}\n")
