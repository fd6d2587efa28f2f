"""Nuclear-norm minimization over an affine set of observation and column-relation constraints.

The feasible set ``C`` fixes observed entries and imposes ``X[:, l] = X[:, J] @ b``
for every relation. Both kinds of constraint act inside a single row, so the
Euclidean projection onto ``C`` splits into ``m`` independent small projections
that are factorized once. The solver alternates singular-value thresholding
with that projection (ADMM in scaled form).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    BlockConstraint,
    ColumnRelation,
    ConstraintError,
    DimensionError,
    DomainError,
    ObservationSet,
    as_matrix,
)
from .linalg import DEFAULT_RCOND, operator_norm, svt

__all__ = [
    "CompletionProblem",
    "SolverOptions",
    "SolveReport",
    "RowProjector",
    "solve",
    "solve_decoupled",
    "relative_error",
    "report_to_json",
]

_CONSISTENCY_TOL = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve`.

    The initial penalty is ``rho / ||P_Omega(M)||_2`` when ``scale_rho`` is set,
    which makes iteration counts independent of the data's magnitude.
    ``adaptive`` turns on residual balancing (penalty doubled or halved when
    one residual exceeds the other tenfold).
    """

    rho: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-7
    rcond_tol: float = DEFAULT_RCOND
    adaptive: bool = True
    scale_rho: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class CompletionProblem:
    """Observed entries plus optional block and relation constraints.

    The block is translated into one relation per dependent column; the
    basis-column values come from ``omega``. Entries pinned both by ``omega``
    and by a relation must agree, otherwise :class:`ConstraintError` is raised.
    """

    omega: ObservationSet
    block: Optional[BlockConstraint] = None
    relations: tuple[ColumnRelation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        n = self.shape[1]
        for rel in self.all_relations():
            if rel.target_col >= n or max(rel.basis_cols) >= n:
                raise DomainError("relation refers to a column outside the matrix")
        self._check_consistency()

    @property
    def shape(self) -> tuple[int, int]:
        return self.omega.shape

    def all_relations(self) -> list[ColumnRelation]:
        rels = [] if self.block is None else self.block.relations()
        return rels + list(self.relations)

    def _check_consistency(self):
        mask = self.omega.mask()
        vals = self.omega.dense()
        for rel in self.all_relations():
            cols = list(rel.basis_cols)
            rows = mask[:, cols + [rel.target_col]].all(axis=1)
            if not rows.any():
                continue
            terms = vals[np.ix_(rows, cols)] * np.asarray(rel.coords)
            target = vals[rows, rel.target_col]
            resid = np.abs(target - terms.sum(axis=1))
            scale = 1.0 + np.abs(target) + np.abs(terms).sum(axis=1)
            if np.any(resid > _CONSISTENCY_TOL * scale):
                raise ConstraintError(
                    f"relation for column {rel.target_col} disagrees with observed entries "
                    f"(max residual {resid.max():.3e})"
                )

    def violation(self, X) -> tuple[float, float]:
        """Largest violation of the observed entries and of the relations at ``X``."""
        X = np.asarray(X, dtype=float)
        om = self.omega
        obs = float(np.max(np.abs(X[om.rows, om.cols] - om.values))) if len(om) else 0.0
        rel = 0.0
        for r in self.all_relations():
            d = X[:, r.target_col] - X[:, list(r.basis_cols)] @ np.asarray(r.coords)
            rel = max(rel, float(np.max(np.abs(d))))
        return obs, rel


class RowProjector:
    """Exact Euclidean projection onto the feasible set, row by row.

    In row ``i`` the observed coordinates are fixed and the relations become
    ``R_F x_F = c_i`` on the free coordinates ``F``. Each row's map
    ``x -> P_i x + q_i`` is precomputed from an SVD of ``R_F``, which also
    covers redundant relations.
    """

    def __init__(self, problem: CompletionProblem, rcond_tol: float = DEFAULT_RCOND):
        m, n = problem.shape
        self.shape = (m, n)
        self._mask = problem.omega.mask()
        self._vals = problem.omega.dense()
        rels = problem.all_relations()
        self._P = None
        self._q = None
        if not rels:
            return
        R = np.zeros((len(rels), n))
        for a, rel in enumerate(rels):
            R[a, rel.target_col] = 1.0
            R[a, list(rel.basis_cols)] -= np.asarray(rel.coords)
        P = np.zeros((m, n, n))
        q = np.where(self._mask, self._vals, 0.0)
        for i in range(m):
            free = ~self._mask[i]
            fidx = np.flatnonzero(free)
            if fidx.size == 0:
                continue
            RF = R[:, free]
            c = -R[:, ~free] @ self._vals[i, ~free]
            live = np.any(RF != 0, axis=1)
            if np.any(np.abs(c[~live]) > _CONSISTENCY_TOL * (1 + np.abs(R[~live]) @ np.abs(self._vals[i]))):
                raise ConstraintError(f"row {i}: relations contradict observed entries")
            RF, c = RF[live], c[live]
            PF = np.eye(fidx.size)
            if RF.shape[0]:
                Vr, qF = _row_space(RF, c, rcond_tol)
                if np.max(np.abs(RF @ qF - c)) > 1e-8 * (1 + np.max(np.abs(c))):
                    raise ConstraintError(f"row {i}: relations are mutually inconsistent")
                PF -= Vr.T @ Vr
                q[i, fidx] = qF
            P[i][np.ix_(fidx, fidx)] = PF
        self._P, self._q = P, q

    def project(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape:
            raise DimensionError(f"expected shape {self.shape}, got {X.shape}")
        if self._P is None:
            return np.where(self._mask, self._vals, X)
        return np.matmul(self._P, X[:, :, None])[:, :, 0] + self._q

    __call__ = project


def _row_space(A: np.ndarray, c: np.ndarray, rcond_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the row space of ``A`` and the minimum-norm solution of ``A x = c``.

    Uses the SVD rather than ``A A^T``, so redundant or nearly dependent
    relations do not square the conditioning.
    """
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > rcond_tol * s[0])) if s.size and s[0] > 0 else 0
    Vr = Vt[:r]
    return Vr, Vr.T @ ((U[:, :r].T @ c) / s[:r])


@dataclass(frozen=True, eq=False)
class SolveReport:
    X_hat: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    constraint_violation_max: float
    rho_final: float = field(default=float("nan"))


def solve(problem: CompletionProblem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Minimize the nuclear norm over the problem's feasible set.

    Iterates ``X = svt(Z - U, 1/rho)``, ``Z = proj(X + U)``, ``U += X - Z`` and
    stops once both ``||X - Z||_F`` and ``rho ||Z - Z_prev||_F`` fall below
    ``tol * max(1, ||X||_F)``. The returned matrix is the projected iterate
    ``Z``, so it satisfies the constraints up to rounding even when the run
    hits ``max_iters`` (reported through ``converged=False``).
    """
    proj = RowProjector(problem, opts.rcond_tol)
    Z = proj(np.zeros(problem.shape))
    U = np.zeros(problem.shape)
    rho = opts.rho
    if opts.scale_rho:
        s1 = float(np.linalg.norm(problem.omega.dense(), 2))
        if s1 > 0:
            rho /= s1
    it = 0
    r_p = r_d = float("inf")
    converged = False
    for it in range(1, opts.max_iters + 1):
        X = svt(Z - U, 1.0 / rho)
        Z_prev = Z
        Z = proj(X + U)
        U += X - Z
        r_p = float(np.linalg.norm(X - Z))
        r_d = rho * float(np.linalg.norm(Z - Z_prev))
        eps = opts.tol * max(1.0, float(np.linalg.norm(X)))
        if r_p <= eps and r_d <= eps:
            converged = True
            break
        if opts.adaptive:
            if r_p > 10 * r_d:
                rho *= 2.0
                U /= 2.0
            elif r_d > 10 * r_p:
                rho /= 2.0
                U *= 2.0
    return SolveReport(Z, it, r_p, r_d, converged, max(problem.violation(Z)), rho)


def solve_decoupled(problem: CompletionProblem, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Fill the block from its fully observed basis columns, then solve the rest alone.

    Columns of ``tau`` are set to ``M[:, J] @ B`` exactly; nuclear-norm
    minimization runs only on the columns outside ``tau`` with their own
    observations and any relations confined to them.
    """
    block = problem.block
    if block is None:
        raise DomainError("decoupled solve needs a block constraint")
    m, n = problem.shape
    mask = problem.omega.mask()
    J = list(block.basis_cols)
    if not mask[:, J].all():
        raise DomainError("basis columns of the block must be fully observed")
    V = problem.omega.dense()[:, J]
    X = np.zeros((m, n))
    X[:, J] = V
    X[:, list(block.dependent_cols)] = V @ block.coords
    rest = list(block.tau.complement())
    if not rest:
        return SolveReport(X, 0, 0.0, 0.0, True, max(problem.violation(X)), float("nan"))
    rest_pos = {j: a for a, j in enumerate(rest)}
    sub_rel = []
    for rel in problem.relations:
        if rel.target_col in rest_pos and all(j in rest_pos for j in rel.basis_cols):
            sub_rel.append(ColumnRelation([rest_pos[j] for j in rel.basis_cols], rest_pos[rel.target_col], rel.coords))
    sub = CompletionProblem(problem.omega.restrict_columns(rest), relations=tuple(sub_rel))
    rep = solve(sub, opts)
    X[:, rest] = rep.X_hat
    return SolveReport(
        X, rep.iterations, rep.primal_residual, rep.dual_residual, rep.converged,
        max(problem.violation(X)), rep.rho_final,
    )


def relative_error(X_hat, M) -> float:
    """``||X_hat - M||_2 / ||M||_2`` in the operator norm."""
    X_hat = as_matrix(X_hat, "X_hat")
    M = as_matrix(M, "M")
    if X_hat.shape != M.shape:
        raise DimensionError(f"shape mismatch {X_hat.shape} vs {M.shape}")
    denom = operator_norm(M)
    if denom == 0:
        raise DomainError("relative error is undefined for M = 0")
    return operator_norm(X_hat - M) / denom


def report_to_json(report: SolveReport, include_matrix: bool = False, indent: Optional[int] = None) -> str:
    doc = {
        "iterations": report.iterations,
        "primal_residual": report.primal_residual,
        "dual_residual": report.dual_residual,
        "converged": report.converged,
        "constraint_violation_max": report.constraint_violation_max,
    }
    if include_matrix:
        doc["X_hat"] = report.X_hat.tolist()
    return json.dumps(doc, indent=indent)
