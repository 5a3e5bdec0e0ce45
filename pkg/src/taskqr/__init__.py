"""Task-graph scheduled in-place Householder factorization.

The factorization is split into chunk-coalesced tasks over a dependency
DAG and executed under interchangeable scheduling strategies (sequential
reference, barrier-synchronized, dual-queue lock-free, priority) that all
produce byte-identical results.  The in-place layout keeps every reflector
recoverable, which is what the substitution solver consumes.
"""

from .bench import BenchRecord, gen_matrix
from .graph import (
    ChunkGrid,
    GraphReport,
    TaskGraph,
    TaskId,
    TaskKind,
    TaskNode,
    build_task_graph,
    compute_levels,
    mark_critical_and_releasers,
    to_dot,
    validate_graph,
)
from .kernels import (
    PivotResult,
    ReflectorStore,
    reconstruct_original,
    sequential_factorize,
    update_pivot_row,
    update_trailing_non_pivot_row,
)
from .schedulers import (
    DependencyTable,
    RunReport,
    SchedulerConfig,
    SchedulerKind,
    SchedulerStalledError,
    execute,
    factorize,
    run_barrier,
    run_lockfree,
    run_priority,
    run_sequential,
    run_task1,
    run_task2,
)
from .solver import (
    Factorization,
    SingularMatrixError,
    apply_reflectors_reverse,
    condition_estimate,
    forward_substitute,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BenchRecord",
    "ChunkGrid",
    "DependencyTable",
    "Factorization",
    "GraphReport",
    "PivotResult",
    "ReflectorStore",
    "RunReport",
    "SchedulerConfig",
    "SchedulerKind",
    "SchedulerStalledError",
    "SingularMatrixError",
    "TaskGraph",
    "TaskId",
    "TaskKind",
    "TaskNode",
    "apply_reflectors_reverse",
    "build_task_graph",
    "compute_levels",
    "condition_estimate",
    "execute",
    "factorize",
    "forward_substitute",
    "gen_matrix",
    "mark_critical_and_releasers",
    "reconstruct_original",
    "run_barrier",
    "run_lockfree",
    "run_priority",
    "run_sequential",
    "run_task1",
    "run_task2",
    "sequential_factorize",
    "solve",
    "to_dot",
    "update_pivot_row",
    "update_trailing_non_pivot_row",
    "validate_graph",
]
