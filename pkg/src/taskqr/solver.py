"""Linear solves on top of the in-place factorization.

The factorized matrix plus the reflector store is everything a solve needs:
the triangular factor sits on and below the diagonal, and each reflector is
recoverable from its ``up`` scalar and the in-row tail, so the orthogonal
factor is applied without ever being formed densely.  With the factors
written as ``A = L * H_{p-1} * ... * H_0``, solving ``A x = rhs`` is a
forward substitution against ``L`` followed by applying the reflectors in
reverse pivot order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import ReflectorStore

__all__ = [
    "Factorization",
    "SingularMatrixError",
    "forward_substitute",
    "apply_reflectors_reverse",
    "solve",
    "condition_estimate",
]


class SingularMatrixError(ValueError):
    """Raised when substitution hits an exactly zero diagonal entry."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is singular: zero diagonal entry at pivot {pivot}")
        self.pivot = pivot


@dataclass
class Factorization:
    """A factorized matrix and its reflector store, as produced in place by
    any of the executors."""

    mat: np.ndarray
    store: ReflectorStore

    @property
    def m(self) -> int:
        return self.mat.shape[0]

    @property
    def n(self) -> int:
        return self.mat.shape[1]


def _require_square(fact: Factorization) -> None:
    if fact.m != fact.n:
        raise ValueError(f"square system required, got {fact.m}x{fact.n}")


def forward_substitute(fact: Factorization, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L y = rhs`` where ``L`` is the diagonal plus strictly-lower
    part of the factorized matrix, in increasing index order."""
    _require_square(fact)
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (fact.m,):
        raise ValueError(f"rhs must have length {fact.m}")
    mat = fact.mat
    y = np.zeros(fact.m)
    for i in range(fact.m):
        d = mat[i, i]
        if d == 0.0:
            raise SingularMatrixError(i)
        acc = rhs[i] - np.dot(mat[i, :i], y[:i])
        y[i] = acc / d
    return y


def apply_reflectors_reverse(fact: Factorization, y: np.ndarray) -> np.ndarray:
    """Apply the stored reflectors to ``y`` in reverse pivot order
    (``H_0 ... H_{p-1} y``), undoing the accumulated transformation.

    Undefined pivots are identity reflectors and are skipped.
    """
    y = np.asarray(y, dtype=np.float64).copy()
    if y.shape != (fact.n,):
        raise ValueError(f"vector must have length {fact.n}")
    mat = fact.mat
    store = fact.store
    for i in range(store.pivot_count - 1, -1, -1):
        if not store.defined[i]:
            continue
        up = store.up[i]
        sm = y[i] * up + np.dot(y[i + 1 :], mat[i, i + 1 :])
        s = sm / store.b[i]
        y[i] += s * up
        y[i + 1 :] += s * mat[i, i + 1 :]
    return y


def solve(fact: Factorization, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` for the matrix ``A`` the factorization came from."""
    return apply_reflectors_reverse(fact, forward_substitute(fact, rhs))


def condition_estimate(fact: Factorization) -> float:
    """Cheap conditioning indicator: max |diagonal| / min |diagonal|.

    Infinite when any diagonal entry is exactly zero; only reported, never
    used to reject a solve.
    """
    diag = np.abs(np.diagonal(fact.mat))
    lo = diag.min()
    if lo == 0.0:
        return float("inf")
    return float(diag.max() / lo)
