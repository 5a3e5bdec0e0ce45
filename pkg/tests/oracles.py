"""Independent reference implementations used to cross-check the library.

Everything here favors obviousness over speed: dense explicit reflector
matrices, exhaustive path enumeration, ancestor bitmasks.  None of it calls
back into the code paths it checks.
"""

from collections import defaultdict, deque

import numpy as np

from taskqr.graph import TaskGraph, TaskKind


def explicit_reflector(v: np.ndarray) -> np.ndarray:
    """Dense reflector matrix I - v v^T * (2 / ||v||^2)."""
    v = np.asarray(v, dtype=np.float64)
    return np.eye(len(v)) - np.outer(v, v) * (2.0 / np.dot(v, v))


def reflector_vector(mat_fact: np.ndarray, store, i: int) -> np.ndarray:
    """Reflector i as a full-length vector: zeros, then up, then the tail."""
    n = mat_fact.shape[1]
    v = np.zeros(n)
    v[i] = store.up[i]
    v[i + 1 :] = mat_fact[i, i + 1 :]
    return v


def accumulate_q(mat_fact: np.ndarray, store) -> np.ndarray:
    """Dense product H_{p-1} @ ... @ H_0 of the stored reflectors."""
    n = mat_fact.shape[1]
    p = min(mat_fact.shape)
    q = np.eye(n)
    for i in range(p - 1, -1, -1):
        if store.defined[i]:
            q = q @ explicit_reflector(reflector_vector(mat_fact, store, i))
    return q


def topo_order(graph: TaskGraph):
    pending = {nd.index: len(nd.parent_indexes) for nd in graph.order}
    ready = deque(i for i, c in pending.items() if c == 0)
    out = []
    while ready:
        i = ready.popleft()
        out.append(i)
        for r in _children_indexes(graph, i):
            pending[r] -= 1
            if pending[r] == 0:
                ready.append(r)
    assert len(out) == len(graph.order), "cycle in graph under test"
    return out


def _children_indexes(graph: TaskGraph, index: int):
    node = graph.order[index]
    return [graph.nodes[c].index for c in node.children]


def dfs_levels(graph: TaskGraph):
    """Longest root->v and v->leaf path lengths by memoized depth-first
    search (a deliberately different algorithm from the library's)."""
    nodes = graph.order
    top = {}
    bottom = {}

    def walk_top(i: int) -> int:
        if i in top:
            return top[i]
        parents = nodes[i].parent_indexes
        top[i] = 0 if not parents else 1 + max(walk_top(p) for p in parents)
        return top[i]

    def walk_bottom(i: int) -> int:
        if i in bottom:
            return bottom[i]
        kids = _children_indexes(graph, i)
        bottom[i] = 0 if not kids else 1 + max(walk_bottom(k) for k in kids)
        return bottom[i]

    for i in range(len(nodes)):
        walk_top(i)
        walk_bottom(i)
    return top, bottom


def enumerate_levels(graph: TaskGraph):
    """True brute force: enumerate every directed path.  Exponential; only
    for graphs with a couple dozen nodes."""
    nodes = graph.order
    children = {i: _children_indexes(graph, i) for i in range(len(nodes))}
    parents = {i: list(nodes[i].parent_indexes) for i in range(len(nodes))}
    top = {}
    bottom = {}

    def longest(start: int, nxt) -> int:
        best = 0
        stack = [(start, 0)]
        while stack:
            i, depth = stack.pop()
            best = max(best, depth)
            for j in nxt[i]:
                stack.append((j, depth + 1))
        return best

    for i in range(len(nodes)):
        top[i] = longest(i, parents)
        bottom[i] = longest(i, children)
    return top, bottom


def ancestor_masks(graph: TaskGraph):
    """Bitmask of strict ancestors per node index."""
    anc = [0] * len(graph.order)
    for i in topo_order(graph):
        mask = 0
        for p in graph.order[i].parent_indexes:
            mask |= anc[p] | (1 << p)
        anc[i] = mask
    return anc


def work_pairs(graph: TaskGraph):
    """Multiset of (pivot, row) trailing updates plus pivot ownership."""
    pair_count: dict[tuple[int, int], int] = defaultdict(int)
    pivot_count: dict[int, int] = defaultdict(int)
    for node in graph.order:
        if node.id.kind == TaskKind.DIAGONAL:
            for lp in range(node.pivot_start, node.pivot_end):
                pivot_count[lp] += 1
        for lp in range(node.pivot_start, node.pivot_end):
            for row in range(max(node.row_start, lp + 1), node.row_end):
                pair_count[(lp, row)] += 1
    return pair_count, pivot_count


def check_coverage(graph: TaskGraph):
    """Exact partition: every (pivot, row<m) pair once, every pivot once."""
    pair_count, pivot_count = work_pairs(graph)
    grid = graph.grid
    for lp in range(grid.p):
        assert pivot_count.get(lp) == 1, f"pivot {lp} owned {pivot_count.get(lp, 0)} times"
        for row in range(lp + 1, grid.m):
            got = pair_count.pop((lp, row), 0)
            assert got == 1, f"pair ({lp}, {row}) covered {got} times"
    assert not pair_count, f"stray work pairs {list(pair_count)[:4]}"


def check_order_safety(graph: TaskGraph):
    """Any two tasks writing the same row at different levels must be
    ordered by a directed path (checked via the ancestor closure)."""
    anc = ancestor_masks(graph)
    by_row: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for node in graph.order:
        for row in range(node.row_start, node.row_end):
            by_row[row].append((node.id.pivot_block, node.index))
    for row, touched in by_row.items():
        touched.sort()
        levels = [lvl for lvl, _ in touched]
        assert len(set(levels)) == len(levels), f"row {row} written twice at one level"
        for (_, earlier), (_, later) in zip(touched, touched[1:]):
            assert anc[later] >> earlier & 1, (
                f"row {row}: task {graph.order[earlier].id.name()} not ordered "
                f"before {graph.order[later].id.name()}"
            )


def simulate_priority_run(graph: TaskGraph):
    """Single-thread dual-queue simulation with a max-priority ready set;
    predicts the exact pop order of the priority executor at one thread."""
    import heapq

    nodes = graph.order
    done = [False] * len(nodes)
    heap = [(-nodes[graph.nodes[graph.root].index].priority, graph.nodes[graph.root].index)]
    waiting: deque[int] = deque()
    order = []
    while heap or waiting:
        if heap:
            _, i = heapq.heappop(heap)
            done[i] = True
            order.append(nodes[i].id)
            for r in nodes[i].release_indexes:
                if all(done[p] for p in nodes[r].parent_indexes):
                    heapq.heappush(heap, (-nodes[r].priority, r))
                else:
                    waiting.append(r)
        if waiting:
            i = waiting.popleft()
            if all(done[p] for p in nodes[i].parent_indexes):
                heapq.heappush(heap, (-nodes[i].priority, i))
            else:
                waiting.append(i)
    return order
