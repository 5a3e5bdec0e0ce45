"""Compiled Householder row kernels shared by every execution path.

Every scheduler, and the sequential reference, dispatches into the same
compiled routines below, so the per-row floating-point arithmetic is
identical no matter how the work is chunked or interleaved across threads.
Summations run strictly left to right; nothing here may be reordered
without breaking the exact-equality guarantees the executors are tested
against.

All functions are compiled ``nogil`` so worker threads run them truly in
parallel.
"""

import math

import numpy as np
from numba import njit

__all__ = [
    "pivot_kernel",
    "row_kernel",
    "task1_body",
    "task2_body",
    "sequential_body",
    "warmup",
]


@njit(cache=True, nogil=True)
def pivot_kernel(mat, lpivot):
    """Build the reflector for pivot ``lpivot`` from mat[lpivot, lpivot:].

    The segment is scanned for its largest magnitude first and the norm is
    accumulated on the rescaled entries, which keeps the norm computation
    from overflowing prematurely.  On a nonzero segment the diagonal entry
    is replaced with ``cl`` and the tail is left in place as the stored
    reflector; an identically zero segment leaves the matrix untouched.

    Returns ``(up, b, defined)`` with ``b = up * cl < 0`` when defined.
    """
    n = mat.shape[1]
    cl0 = 0.0
    for k in range(lpivot, n):
        a = abs(mat[lpivot, k])
        if a > cl0:
            cl0 = a
    if cl0 == 0.0:
        return 0.0, 0.0, False
    sm = 0.0
    for k in range(lpivot, n):
        t = mat[lpivot, k] / cl0
        sm += t * t
    cl = cl0 * math.sqrt(sm)
    x_first = mat[lpivot, lpivot]
    if x_first > 0.0:
        cl = -cl
    up = x_first - cl
    b = up * cl
    mat[lpivot, lpivot] = cl
    return up, b, True


@njit(cache=True, nogil=True)
def row_kernel(mat, lpivot, j, up, b):
    """Apply pivot ``lpivot``'s stored reflector to row ``j`` in place.

    Row ``j`` is the only row written; the pivot row is read-only here.
    """
    n = mat.shape[1]
    sm = mat[j, lpivot] * up
    for k in range(lpivot + 1, n):
        sm += mat[j, k] * mat[lpivot, k]
    if sm == 0.0:
        return
    s = sm / b
    mat[j, lpivot] += s * up
    for k in range(lpivot + 1, n):
        mat[j, k] += s * mat[lpivot, k]


@njit(cache=True, nogil=True)
def task1_body(mat, up_arr, b_arr, defined, pivot_start, pivot_end, row_end):
    """Diagonal-task body: pivots [pivot_start, pivot_end) plus their
    trailing updates up to (but excluding) row_end."""
    for lpivot in range(pivot_start, pivot_end):
        up, b, ok = pivot_kernel(mat, lpivot)
        if not ok:
            continue
        up_arr[lpivot] = up
        b_arr[lpivot] = b
        defined[lpivot] = True
        for j in range(lpivot + 1, row_end):
            row_kernel(mat, lpivot, j, up, b)


@njit(cache=True, nogil=True)
def task2_body(mat, up_arr, b_arr, defined, pivot_start, pivot_end, row_start, row_end):
    """Trailing-task body: apply pivots [pivot_start, pivot_end) to rows
    [row_start, row_end), skipping undefined pivots."""
    for lpivot in range(pivot_start, pivot_end):
        if not defined[lpivot]:
            continue
        up = up_arr[lpivot]
        b = b_arr[lpivot]
        for j in range(row_start, row_end):
            row_kernel(mat, lpivot, j, up, b)


@njit(cache=True, nogil=True)
def sequential_body(mat, up_arr, b_arr, defined):
    """Whole-matrix single-thread factorization; the reference everything
    else is compared against byte for byte."""
    m = mat.shape[0]
    p = min(m, mat.shape[1])
    for i in range(p):
        up, b, ok = pivot_kernel(mat, i)
        if not ok:
            continue
        up_arr[i] = up
        b_arr[i] = b
        defined[i] = True
        for j in range(i + 1, m):
            row_kernel(mat, i, j, up, b)


def warmup():
    """Force compilation of every kernel so timed runs never include JIT."""
    mat = np.array([[3.0, 4.0], [1.0, 2.0]])
    up = np.zeros(2)
    b = np.zeros(2)
    defined = np.zeros(2, dtype=np.bool_)
    sequential_body(mat, up, b, defined)
    mat = np.array([[3.0, 4.0], [1.0, 2.0]])
    task1_body(mat, up, b, defined, 0, 1, 1)
    task2_body(mat, up, b, defined, 0, 1, 1, 2)
    task1_body(mat, up, b, defined, 1, 2, 2)
