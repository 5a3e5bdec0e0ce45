"""Chunked task-DAG construction for the in-place factorization.

The factorization is carved into two task shapes controlled by ``alpha``
(pivots per diagonal task) and ``beta`` (rows per trailing task):

* ``Diagonal(I)`` computes the pivot block ``pivot_blocks[I]`` and applies
  each pivot to the remaining rows up to the next row-block boundary
  (``diag_end``), so everything a later pivot inside the same task needs is
  already up to date regardless of how ``alpha`` and ``beta`` relate.
* ``Trailing(I, J)`` applies that pivot block to row block ``J``.

``Trailing(I, J)`` depends on ``Diagonal(I)`` (reflectors published) and on
whichever level ``I-1`` task last touched row block ``J``.  ``Diagonal(I)``
depends on every level ``I-1`` task overlapping its own row range.  Each
non-root task is additionally assigned exactly one *releaser* among its
parents: the only parent allowed to enqueue it, which is what keeps the
dual-queue executors free of duplicate pushes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, NamedTuple

__all__ = [
    "TaskKind",
    "TaskId",
    "TaskNode",
    "ChunkGrid",
    "TaskGraph",
    "GraphReport",
    "build_task_graph",
    "compute_levels",
    "diagonal_id",
    "mark_critical_and_releasers",
    "trailing_id",
    "validate_graph",
    "to_dot",
]


class TaskKind(IntEnum):
    DIAGONAL = 0
    TRAILING = 1


class TaskId(NamedTuple):
    """(kind, pivot-block index, row-block index); row_block is -1 for
    diagonal tasks.  Tuple order doubles as the deterministic tie-break:
    diagonal first, then smaller pivot block, then smaller row block."""

    kind: TaskKind
    pivot_block: int
    row_block: int

    def name(self) -> str:
        if self.kind == TaskKind.DIAGONAL:
            return f"D{self.pivot_block}"
        return f"T{self.pivot_block}.{self.row_block}"


def diagonal_id(i: int) -> TaskId:
    return TaskId(TaskKind.DIAGONAL, i, -1)


def trailing_id(i: int, j: int) -> TaskId:
    return TaskId(TaskKind.TRAILING, i, j)


@dataclass
class TaskNode:
    """One task: its pivot range, the row range it writes, and its wiring."""

    id: TaskId
    pivot_start: int
    pivot_end: int
    row_start: int
    row_end: int
    parents: list[TaskId] = field(default_factory=list)
    children: list[TaskId] = field(default_factory=list)
    critical: bool = False
    releases: list[TaskId] = field(default_factory=list)
    priority: int = 0
    top_level: int = 0
    bottom_level: int = 0
    # dense fields filled in by build_task_graph for the executors' hot path
    index: int = -1
    parent_indexes: tuple[int, ...] = ()
    release_indexes: tuple[int, ...] = ()
    # (is_diagonal, pivot_start, pivot_end, row_start, row_end)
    params: tuple = ()


@dataclass
class ChunkGrid:
    """Pivot and row chunking for given (m, n, alpha, beta).

    ``row_blocks`` are aligned to multiples of ``beta``; ``diag_ends[I]`` is
    the first row-block boundary at or past the end of pivot block ``I`` and
    bounds the rows the diagonal task updates itself.
    """

    alpha: int
    beta: int
    m: int
    n: int
    p: int
    pivot_blocks: list[tuple[int, int]]
    row_blocks: list[tuple[int, int]]
    diag_ends: list[int]

    @classmethod
    def build(cls, m: int, n: int, alpha: int, beta: int) -> "ChunkGrid":
        if m < 1 or n < 1 or alpha < 1 or beta < 1:
            raise ValueError("m, n, alpha and beta must all be >= 1")
        p = min(m, n)
        pivot_blocks = [(s, min(s + alpha, p)) for s in range(0, p, alpha)]
        row_blocks = [(s, min(s + beta, m)) for s in range(0, m, beta)]
        diag_ends = [min(-(-pe // beta) * beta, m) for _, pe in pivot_blocks]
        return cls(alpha, beta, m, n, p, pivot_blocks, row_blocks, diag_ends)

    def row_block_of(self, row: int) -> int:
        return row // self.beta


@dataclass
class TaskGraph:
    """Immutable once built; safe to share across any number of threads."""

    grid: ChunkGrid
    nodes: dict[TaskId, TaskNode]
    root: TaskId
    order: list[TaskNode] = field(default_factory=list)
    schedule_order: list[TaskNode] = field(default_factory=list)

    def node(self, tid: TaskId) -> TaskNode:
        return self.nodes[tid]

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[TaskNode]:
        return iter(self.order)


@dataclass
class GraphReport:
    """validate_graph outcome; ``failure`` carries the first violation."""

    ok: bool
    failure: str | None = None


def build_task_graph(m: int, n: int, alpha: int, beta: int) -> TaskGraph:
    """Build the full task graph: nodes, edges, levels, critical marks,
    releaser designations and priorities."""
    grid = ChunkGrid.build(m, n, alpha, beta)
    nodes: dict[TaskId, TaskNode] = {}

    for i, (ps, pe) in enumerate(grid.pivot_blocks):
        de = grid.diag_ends[i]
        nodes[diagonal_id(i)] = TaskNode(diagonal_id(i), ps, pe, ps, de)
        for j, (rs, re) in enumerate(grid.row_blocks):
            if rs >= de:
                nodes[trailing_id(i, j)] = TaskNode(trailing_id(i, j), ps, pe, rs, re)

    levels = len(grid.pivot_blocks)
    for i in range(levels):
        de_prev = grid.diag_ends[i - 1] if i >= 1 else 0
        level_prev = _level_nodes(grid, nodes, i - 1) if i >= 1 else []
        diag = nodes[diagonal_id(i)]
        if i >= 1:
            for prev in level_prev:
                if prev.row_start < diag.row_end and diag.row_start < prev.row_end:
                    diag.parents.append(prev.id)
        for j, (rs, _) in enumerate(grid.row_blocks):
            tid = trailing_id(i, j)
            if tid not in nodes:
                continue
            trail = nodes[tid]
            trail.parents.append(diag.id)
            if i >= 1:
                if rs >= de_prev:
                    trail.parents.append(trailing_id(i - 1, j))
                else:
                    trail.parents.append(diagonal_id(i - 1))

    for node in nodes.values():
        for pid in node.parents:
            nodes[pid].children.append(node.id)

    graph = TaskGraph(grid=grid, nodes=nodes, root=diagonal_id(0))
    top, bottom = compute_levels(graph)
    for tid, node in nodes.items():
        node.top_level = top[tid]
        node.bottom_level = bottom[tid]
        node.priority = bottom[tid]
    mark_critical_and_releasers(graph)

    order = sorted(nodes.values(), key=lambda nd: nd.id)
    for idx, node in enumerate(order):
        node.index = idx
    for node in order:
        node.parent_indexes = tuple(nodes[t].index for t in node.parents)
        node.release_indexes = tuple(nodes[t].index for t in node.releases)
        node.params = (
            node.id.kind == TaskKind.DIAGONAL,
            node.pivot_start,
            node.pivot_end,
            node.row_start,
            node.row_end,
        )
    graph.order = order
    graph.schedule_order = sorted(order, key=lambda nd: (-nd.priority, nd.index))
    return graph


def _level_nodes(grid: ChunkGrid, nodes: dict[TaskId, TaskNode], i: int) -> list[TaskNode]:
    out = [nodes[diagonal_id(i)]]
    for j in range(len(grid.row_blocks)):
        tid = trailing_id(i, j)
        if tid in nodes:
            out.append(nodes[tid])
    return out


def compute_levels(graph: TaskGraph) -> tuple[dict[TaskId, int], dict[TaskId, int]]:
    """Longest-path depths with unit edge weights.

    ``top[v]`` is the longest path from the root to ``v`` (excluding ``v``),
    ``bottom[v]`` the longest path from ``v`` to any leaf.  Raises on a
    cycle, which would mean the builder's invariants are broken.
    """
    nodes = graph.nodes
    indegree = {tid: len(nd.parents) for tid, nd in nodes.items()}
    ready = deque(tid for tid, d in indegree.items() if d == 0)
    topo: list[TaskId] = []
    top: dict[TaskId, int] = {}
    while ready:
        tid = ready.popleft()
        topo.append(tid)
        nd = nodes[tid]
        top[tid] = 0 if not nd.parents else 1 + max(top[p] for p in nd.parents)
        for child in nd.children:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    if len(topo) != len(nodes):
        raise ValueError("task graph contains a cycle")
    bottom: dict[TaskId, int] = {}
    for tid in reversed(topo):
        nd = nodes[tid]
        bottom[tid] = 0 if not nd.children else 1 + max(bottom[c] for c in nd.children)
    return top, bottom


def mark_critical_and_releasers(graph: TaskGraph) -> None:
    """Mark the critical chain and designate one releasing parent per task.

    Critical tasks are every diagonal plus every trailing task that feeds a
    diagonal.  Releasers: trailing tasks are released by their own diagonal;
    ``Diagonal(I)`` is released by the trailing parent covering the first
    row past ``diag_ends[I-1]``, falling back to ``Diagonal(I-1)`` when the
    previous level had no trailing work left for its rows.
    """
    grid = graph.grid
    nodes = graph.nodes
    for node in nodes.values():
        node.critical = node.id.kind == TaskKind.DIAGONAL
        node.releases = []
    for i in range(len(grid.pivot_blocks)):
        for pid in nodes[diagonal_id(i)].parents:
            nodes[pid].critical = True
    for tid, node in nodes.items():
        if tid.kind == TaskKind.TRAILING:
            nodes[diagonal_id(tid.pivot_block)].releases.append(tid)
    for i in range(1, len(grid.pivot_blocks)):
        de_prev = grid.diag_ends[i - 1]
        if de_prev < grid.diag_ends[i]:
            releaser = trailing_id(i - 1, grid.row_block_of(de_prev))
        else:
            releaser = diagonal_id(i - 1)
        nodes[releaser].releases.append(diagonal_id(i))
    for node in nodes.values():
        node.releases.sort()


def validate_graph(graph: TaskGraph) -> GraphReport:
    """Structural audit of a graph: acyclicity, edge mirroring, exact
    coverage of every (pivot, row) work pair, dependency completeness per
    the construction rule, and the one-releaser-per-task discipline."""
    grid = graph.grid
    nodes = graph.nodes

    try:
        compute_levels(graph)
    except ValueError:
        return GraphReport(False, "cycle detected")

    for tid, node in nodes.items():
        for pid in node.parents:
            if pid not in nodes or tid not in nodes[pid].children:
                return GraphReport(False, f"edge mirror broken: {tid.name()} -> parent {pid.name()}")
        for cid in node.children:
            if cid not in nodes or tid not in nodes[cid].parents:
                return GraphReport(False, f"edge mirror broken: {tid.name()} -> child {cid.name()}")

    pivot_owner = [0] * grid.p
    for tid, node in nodes.items():
        if tid.kind == TaskKind.DIAGONAL:
            for lp in range(node.pivot_start, node.pivot_end):
                pivot_owner[lp] += 1
    if any(c != 1 for c in pivot_owner):
        bad = next(i for i, c in enumerate(pivot_owner) if c != 1)
        return GraphReport(False, f"pivot {bad} covered {pivot_owner[bad]} times")

    cover: dict[tuple[int, int], int] = {}
    for node in nodes.values():
        for lp in range(node.pivot_start, node.pivot_end):
            for row in range(max(node.row_start, lp + 1), node.row_end):
                cover[(lp, row)] = cover.get((lp, row), 0) + 1
    for lp in range(grid.p):
        for row in range(lp + 1, grid.m):
            c = cover.pop((lp, row), 0)
            if c != 1:
                return GraphReport(False, f"work pair (pivot {lp}, row {row}) covered {c} times")
    if cover:
        pair = next(iter(cover))
        return GraphReport(False, f"work pair {pair} outside the factorization")

    for tid, node in nodes.items():
        expected = _expected_parents(grid, tid)
        if set(node.parents) != expected:
            missing = expected - set(node.parents)
            if missing:
                return GraphReport(
                    False,
                    f"uncovered dependency: {tid.name()} missing parent "
                    f"{sorted(missing)[0].name()}",
                )
            extra = set(node.parents) - expected
            return GraphReport(
                False, f"unexpected parent {sorted(extra)[0].name()} of {tid.name()}"
            )

    release_count = {tid: 0 for tid in nodes}
    for node in nodes.values():
        for rid in node.releases:
            if rid not in nodes:
                return GraphReport(False, f"{node.id.name()} releases unknown task")
            if rid not in node.children:
                return GraphReport(False, f"{node.id.name()} releases non-child {rid.name()}")
            release_count[rid] += 1
    for tid, count in release_count.items():
        expected_count = 0 if tid == graph.root else 1
        if count != expected_count:
            return GraphReport(False, f"{tid.name()} has {count} releasers, expected {expected_count}")

    reachable = {graph.root}
    frontier = deque([graph.root])
    while frontier:
        for cid in nodes[frontier.popleft()].children:
            if cid not in reachable:
                reachable.add(cid)
                frontier.append(cid)
    if len(reachable) != len(nodes):
        orphan = next(tid for tid in nodes if tid not in reachable)
        return GraphReport(False, f"{orphan.name()} unreachable from root")

    return GraphReport(True, None)


def _expected_parents(grid: ChunkGrid, tid: TaskId) -> set[TaskId]:
    i = tid.pivot_block
    if tid.kind == TaskKind.TRAILING:
        expected = {diagonal_id(i)}
        if i >= 1:
            rs = grid.row_blocks[tid.row_block][0]
            if rs >= grid.diag_ends[i - 1]:
                expected.add(trailing_id(i - 1, tid.row_block))
            else:
                expected.add(diagonal_id(i - 1))
        return expected
    if i == 0:
        return set()
    ps, _ = grid.pivot_blocks[i]
    de = grid.diag_ends[i]
    expected = set()
    prev_ps = grid.pivot_blocks[i - 1][0]
    prev_de = grid.diag_ends[i - 1]
    if prev_ps < de and ps < prev_de:
        expected.add(diagonal_id(i - 1))
    for j, (rs, re) in enumerate(grid.row_blocks):
        if rs >= prev_de and rs < de and ps < re:
            expected.add(trailing_id(i - 1, j))
    return expected


def to_dot(graph: TaskGraph) -> str:
    """Render the graph as DOT text for debugging and visualization."""
    lines = ["digraph tasks {"]
    for node in graph.order:
        shape = "box" if node.id.kind == TaskKind.DIAGONAL else "ellipse"
        crit = " critical" if node.critical else ""
        lines.append(
            f'  "{node.id.name()}" [label="{node.id.name()}\\nprio={node.priority}{crit}", '
            f"shape={shape}];"
        )
    for node in graph.order:
        for cid in node.children:
            lines.append(f'  "{node.id.name()}" -> "{cid.name()}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
