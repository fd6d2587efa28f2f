"""Shared domain types: observation sets, column structure and budget accounting.

Matrices are plain ``numpy.ndarray`` objects of dtype float64; :func:`as_matrix`
is the single validation point. Every other type here is immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "CompletionError",
    "DimensionError",
    "DomainError",
    "NumericError",
    "SamplingError",
    "ConstraintError",
    "as_matrix",
    "ObservationSet",
    "ColumnSet",
    "ColumnRelation",
    "BlockConstraint",
    "BudgetLedger",
    "project_observed",
    "min_optimal_observations",
]


class CompletionError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CompletionError, ValueError):
    """Shapes of the operands do not agree."""


class DomainError(CompletionError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(CompletionError, ArithmeticError):
    """A numerical kernel failed; ``residual`` holds the offending quantity."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SamplingError(CompletionError, RuntimeError):
    """A sampler gave up. ``ledger`` reports what was spent before it did."""

    def __init__(self, message: str, ledger: "BudgetLedger | None" = None):
        super().__init__(message)
        self.ledger = ledger


class ConstraintError(CompletionError, ValueError):
    """Constraints of a completion problem contradict each other."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Validate ``X`` as a finite, non-empty 2-D float matrix and return a float64 copy."""
    A = np.array(X, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Index set of revealed entries together with their values.

    Indices are 0-based and kept in insertion order, which makes iteration
    deterministic for a fixed construction history.
    """

    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        m, n = (int(s) for s in self.shape)
        if m < 1 or n < 1:
            raise DimensionError(f"shape must be positive, got {self.shape}")
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if not (rows.size == cols.size == values.size):
            raise DimensionError("rows, cols and values must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise DomainError(f"observation index outside a {m}x{n} grid")
            flat = rows * n + cols
            if np.unique(flat).size != flat.size:
                raise DomainError("observation indices must be unique")
        if not np.all(np.isfinite(values)):
            raise DomainError("observed values must be finite")
        object.__setattr__(self, "shape", (m, n))
        object.__setattr__(self, "rows", _frozen(rows.copy()))
        object.__setattr__(self, "cols", _frozen(cols.copy()))
        object.__setattr__(self, "values", _frozen(values.copy()))

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> "ObservationSet":
        return cls(shape, np.zeros(0, int), np.zeros(0, int), np.zeros(0))

    @classmethod
    def from_entries(cls, shape, entries: Iterable[tuple[int, int, float]]) -> "ObservationSet":
        entries = list(entries)
        if not entries:
            return cls.empty(shape)
        r, c, v = zip(*entries)
        return cls(shape, np.array(r), np.array(c), np.array(v, dtype=float))

    @classmethod
    def from_matrix(cls, M, rows, cols) -> "ObservationSet":
        """Observe ``M`` at the given index arrays."""
        M = as_matrix(M, "M")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return cls(M.shape, rows, cols, M[rows, cols])

    @classmethod
    def full(cls, M) -> "ObservationSet":
        M = as_matrix(M, "M")
        r, c = np.indices(M.shape)
        return cls.from_matrix(M, r.ravel(), c.ravel())

    def __len__(self) -> int:
        return int(self.rows.size)

    def __iter__(self) -> Iterator[tuple[int, int, float]]:
        for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            yield i, j, v

    def __contains__(self, ij) -> bool:
        i, j = ij
        return bool(np.any((self.rows == i) & (self.cols == j)))

    def mask(self) -> np.ndarray:
        """Boolean ``m x n`` array, True on observed entries."""
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def dense(self) -> np.ndarray:
        """Observed values placed in an ``m x n`` array, zero elsewhere."""
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.values
        return out

    def restrict_columns(self, columns: Sequence[int]) -> "ObservationSet":
        """Sub-observation on the given columns, re-indexed to ``0..len(columns)-1``."""
        columns = np.asarray(columns, dtype=np.int64)
        remap = np.full(self.shape[1], -1, dtype=np.int64)
        remap[columns] = np.arange(columns.size)
        keep = remap[self.cols] >= 0
        return ObservationSet(
            (self.shape[0], int(columns.size)),
            self.rows[keep],
            remap[self.cols[keep]],
            self.values[keep],
        )


@dataclass(frozen=True)
class ColumnSet:
    """Sorted, duplicate-free subset of ``range(n)``."""

    n: int
    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(j) for j in self.members)
        if any(j < 0 or j >= self.n for j in members):
            raise DomainError(f"column index outside range({self.n})")
        if len(set(members)) != len(members):
            raise DomainError("duplicate column index")
        object.__setattr__(self, "members", tuple(sorted(members)))

    @classmethod
    def first(cls, n: int, t: int) -> "ColumnSet":
        return cls(n, tuple(range(t)))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def complement(self) -> tuple[int, ...]:
        s = set(self.members)
        return tuple(j for j in range(self.n) if j not in s)


@dataclass(frozen=True)
class ColumnRelation:
    """``X[:, target] == X[:, basis_cols] @ coords``, enforced row by row."""

    basis_cols: tuple[int, ...]
    target_col: int
    coords: tuple[float, ...]

    def __post_init__(self):
        basis = tuple(int(j) for j in self.basis_cols)
        coords = tuple(float(c) for c in self.coords)
        if len(set(basis)) != len(basis) or not basis:
            raise DomainError("basis columns must be distinct and non-empty")
        if int(self.target_col) in basis:
            raise DomainError("target column may not belong to its own basis")
        if len(coords) != len(basis):
            raise DimensionError("one coordinate per basis column is required")
        if not all(np.isfinite(coords)):
            raise DomainError("relation coordinates must be finite")
        object.__setattr__(self, "basis_cols", basis)
        object.__setattr__(self, "target_col", int(self.target_col))
        object.__setattr__(self, "coords", coords)

    @property
    def k(self) -> int:
        return len(self.basis_cols)


@dataclass(frozen=True, eq=False)
class BlockConstraint:
    """Block ``tau`` written as basis columns ``J`` times coordinates ``B``.

    ``B`` has one column per element of ``tau`` outside ``J``, in ascending
    column order.
    """

    tau: ColumnSet
    basis_cols: tuple[int, ...]
    coords: np.ndarray

    def __post_init__(self):
        J = tuple(int(j) for j in self.basis_cols)
        if len(set(J)) != len(J) or not set(J) <= set(self.tau.members):
            raise DomainError("basis columns must be distinct members of tau")
        B = np.array(self.coords, dtype=float).reshape(len(J), len(self.tau) - len(J))
        if not np.all(np.isfinite(B)):
            raise DomainError("block coordinates must be finite")
        object.__setattr__(self, "basis_cols", J)
        object.__setattr__(self, "coords", _frozen(B))

    @property
    def k(self) -> int:
        return len(self.basis_cols)

    @property
    def dependent_cols(self) -> tuple[int, ...]:
        J = set(self.basis_cols)
        return tuple(j for j in self.tau.members if j not in J)

    def relations(self) -> list[ColumnRelation]:
        """The block as one :class:`ColumnRelation` per dependent column."""
        return [
            ColumnRelation(self.basis_cols, ell, self.coords[:, c])
            for c, ell in enumerate(self.dependent_cols)
        ]


@dataclass(frozen=True)
class BudgetLedger:
    """Snapshot of observation spending.

    ``wasted`` counts fresh reveals made by probes whose submatrix failed the
    invertibility test; those entries are kept, so they are also part of
    ``spent_structured``.
    """

    total_budget: int
    spent_structured: int = 0
    spent_uniform: int = 0
    wasted: int = 0

    def __post_init__(self):
        if min(self.total_budget, self.spent_structured, self.spent_uniform, self.wasted) < 0:
            raise DomainError("ledger counters must be nonnegative")
        if self.spent_structured + self.spent_uniform > self.total_budget:
            raise DomainError("ledger spends more than its budget")
        if self.wasted > self.spent_structured:
            raise DomainError("wasted reveals must be part of the structured spend")

    @property
    def spent(self) -> int:
        return self.spent_structured + self.spent_uniform

    @property
    def remaining(self) -> int:
        return self.total_budget - self.spent

    def as_dict(self) -> dict:
        return {
            "total_budget": self.total_budget,
            "spent_structured": self.spent_structured,
            "spent_uniform": self.spent_uniform,
            "wasted": self.wasted,
        }


def project_observed(X, omega: ObservationSet) -> np.ndarray:
    """Keep the entries of ``X`` listed in ``omega`` and zero the rest."""
    X = as_matrix(X)
    if X.shape != omega.shape:
        raise DimensionError(f"matrix shape {X.shape} != observation shape {omega.shape}")
    Y = np.zeros_like(X)
    Y[omega.rows, omega.cols] = X[omega.rows, omega.cols]
    return Y


def min_optimal_observations(k: int, t: int, m: int) -> int:
    """Reveals needed to pin down an ``m x t`` block of rank ``k`` exactly: ``k(t+m-k)``."""
    if not 1 <= k <= min(m, t):
        raise DomainError(f"need 1 <= k <= min(m, t), got k={k}, t={t}, m={m}")
    return k * (t + m - k)
