"""In-place Householder row kernels and the sequential reference factorization.

Matrices are plain C-contiguous float64 ``numpy`` arrays, mutated in place.
After factorization the array holds three things at once: the ``cl`` values
on the diagonal, the triangular-factor entries strictly below it, and the
reflector tails to the right of the diagonal within each pivot row.  The
``up``/``b`` scalars that complete each reflector live in a
:class:`ReflectorStore`, which is exactly the state later substitution
solves need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _jit

__all__ = [
    "PivotResult",
    "ReflectorStore",
    "require_matrix",
    "update_pivot_row",
    "update_trailing_non_pivot_row",
    "sequential_factorize",
    "reconstruct_original",
]


class PivotResult(NamedTuple):
    """Reflector scalars for one pivot; ``defined`` is False for an
    identically-zero pivot segment (then ``up == b == 0``)."""

    up: float
    b: float
    defined: bool


@dataclass
class ReflectorStore:
    """Per-pivot reflector scalars published by the factorization.

    ``up[i]`` and ``b[i]`` are written exactly once, by whichever task
    computed pivot ``i``; ``defined[i]`` stays False (with zero scalars)
    when the pivot segment was identically zero.  ``b[i] < 0`` for every
    defined pivot since ``b = -||v||^2 / 2``.
    """

    up: np.ndarray
    b: np.ndarray
    defined: np.ndarray

    @classmethod
    def empty(cls, pivot_count: int) -> "ReflectorStore":
        return cls(
            up=np.zeros(pivot_count),
            b=np.zeros(pivot_count),
            defined=np.zeros(pivot_count, dtype=np.bool_),
        )

    @property
    def pivot_count(self) -> int:
        return len(self.up)

    def copy(self) -> "ReflectorStore":
        return ReflectorStore(self.up.copy(), self.b.copy(), self.defined.copy())


def require_matrix(mat: np.ndarray, check_finite: bool = True) -> np.ndarray:
    """Validate the in-place layout contract: 2-D, float64, C-contiguous."""
    if not isinstance(mat, np.ndarray) or mat.ndim != 2:
        raise TypeError("matrix must be a 2-D numpy array")
    if mat.dtype != np.float64:
        raise TypeError(f"matrix must be float64, got {mat.dtype}")
    if not mat.flags["C_CONTIGUOUS"]:
        raise TypeError("matrix must be C-contiguous (row-major)")
    if mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError("matrix must have at least one row and one column")
    if check_finite and not np.isfinite(mat).all():
        raise ValueError("matrix contains non-finite entries")
    return mat


def update_pivot_row(mat: np.ndarray, lpivot: int) -> PivotResult:
    """Compute pivot ``lpivot``'s reflector from the row segment
    ``mat[lpivot, lpivot:]`` and store ``cl`` on the diagonal.

    The tail ``mat[lpivot, lpivot+1:]`` is deliberately left in place: it is
    the stored reflector needed by every later trailing update and by the
    substitution solver.  A zero segment mutates nothing and reports
    ``defined=False``.
    """
    require_matrix(mat, check_finite=False)
    p = min(mat.shape)
    if not 0 <= lpivot < p:
        raise IndexError(f"pivot index {lpivot} out of range [0, {p})")
    up, b, ok = _jit.pivot_kernel(mat, lpivot)
    return PivotResult(up, b, ok)


def update_trailing_non_pivot_row(
    mat: np.ndarray, lpivot: int, j: int, up: float, b: float
) -> None:
    """Apply pivot ``lpivot``'s reflector (scalars ``up``, ``b``, tail read
    from the pivot row) to row ``j`` in place.

    Callers must skip undefined pivots: ``b == 0`` is a contract violation,
    not a degenerate case.
    """
    require_matrix(mat, check_finite=False)
    if b == 0.0:
        raise ValueError("b must be nonzero; undefined pivots are skipped by callers")
    if not lpivot < j < mat.shape[0]:
        raise IndexError(f"row {j} must satisfy {lpivot} < j < {mat.shape[0]}")
    _jit.row_kernel(mat, lpivot, j, up, b)


def sequential_factorize(mat: np.ndarray) -> ReflectorStore:
    """Factorize ``mat`` in place, one pivot at a time, and return the
    reflector store.

    This is the byte-for-byte reference output: every parallel executor is
    required to reproduce it exactly, because all of them compose the same
    per-row kernels in a row-compatible order.
    """
    require_matrix(mat)
    store = ReflectorStore.empty(min(mat.shape))
    _jit.sequential_body(mat, store.up, store.b, store.defined)
    return store


def reconstruct_original(
    mat_fact: np.ndarray, store: ReflectorStore, original_n: int | None = None
) -> np.ndarray:
    """Undo a factorization through explicit dense reflector matrices.

    Builds each reflector ``H_i = I - v v^T * (2 / ||v||^2)`` from the
    stored scalars and in-row tail (identity when undefined), takes the
    triangular factor from the diagonal and strictly-lower entries, and
    returns ``L @ H_{p-1} @ ... @ H_0``, which must equal the matrix that
    was factorized, up to floating-point error.

    Deliberately naive: dense O(n^3) products, no shortcuts, so it stays an
    independent check on the in-place kernels.
    """
    require_matrix(mat_fact, check_finite=False)
    m, n = mat_fact.shape
    if original_n is not None and original_n != n:
        raise ValueError(f"original_n={original_n} disagrees with matrix width {n}")
    p = min(m, n)
    q = np.eye(n)
    for i in range(p - 1, -1, -1):
        if not store.defined[i]:
            continue
        v = np.zeros(n)
        v[i] = store.up[i]
        v[i + 1 :] = mat_fact[i, i + 1 :]
        h = np.eye(n) - np.outer(v, v) * (2.0 / np.dot(v, v))
        q = q @ h
    lower = np.tril(mat_fact)
    return lower @ q
