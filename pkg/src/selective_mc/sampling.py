"""Observation design: uniform, optimal (full block recovery) and selective (column relations).

Every sampler sees the hidden matrix only through a :class:`MatrixOracle`,
which hands out entries one at a time and keeps the books.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    BlockConstraint,
    BudgetLedger,
    ColumnRelation,
    ColumnSet,
    DomainError,
    NumericError,
    ObservationSet,
    SamplingError,
    as_matrix,
    min_optimal_observations,
)
from .linalg import DEFAULT_RCOND, is_invertible, solve_square

__all__ = [
    "STRATEGIES",
    "MAX_PROBES",
    "MatrixOracle",
    "SamplingPlan",
    "uniform_sample",
    "optimal_sample",
    "selective_sample",
    "default_num_relations",
    "plan_to_json",
    "plan_from_json",
]

STRATEGIES = ("uniform", "optimal", "selective")
MAX_PROBES = 50


class _OverBudget(Exception):
    pass


class MatrixOracle:
    """Query-only view of a hidden matrix.

    ``reveal`` returns an entry and records it. Revealing an entry a second
    time is free and changes no counter. If ``total_budget`` is set, a fresh
    reveal beyond it raises :class:`SamplingError`.
    """

    def __init__(self, M, total_budget: Optional[int] = None):
        self._M = as_matrix(M, "M")
        self._M.setflags(write=False)
        self.shape = self._M.shape
        self.total_budget = total_budget
        self._seen = np.zeros(self.shape, dtype=bool)
        self._order: list[int] = []
        self.spent_structured = 0
        self.spent_uniform = 0
        self.wasted = 0

    @property
    def spent(self) -> int:
        return self.spent_structured + self.spent_uniform

    def is_observed(self, i: int, j: int) -> bool:
        return bool(self._seen[i, j])

    def observed_mask(self) -> np.ndarray:
        return self._seen.copy()

    def reveal(self, i: int, j: int, kind: str = "uniform") -> float:
        i, j = int(i), int(j)
        if not self._seen[i, j]:
            if self.total_budget is not None and self.spent >= self.total_budget:
                raise _OverBudget
            self._seen[i, j] = True
            self._order.append(i * self.shape[1] + j)
            if kind == "structured":
                self.spent_structured += 1
            else:
                self.spent_uniform += 1
        return float(self._M[i, j])

    def reveal_block(self, rows: Sequence[int], cols: Sequence[int], kind: str = "structured") -> np.ndarray:
        """Reveal ``rows x cols`` row-major and return the submatrix."""
        return np.array([[self.reveal(i, j, kind) for j in cols] for i in rows]).reshape(len(rows), len(cols))

    def observations(self) -> ObservationSet:
        flat = np.array(self._order, dtype=np.int64)
        r, c = np.divmod(flat, self.shape[1])
        return ObservationSet(self.shape, r, c, self._M[r, c])

    def ledger(self, total_budget: Optional[int] = None) -> BudgetLedger:
        if total_budget is None:
            total_budget = self.total_budget if self.total_budget is not None else self.spent
        return BudgetLedger(total_budget, self.spent_structured, self.spent_uniform, self.wasted)


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    """Observations plus whatever column structure the sampler discovered."""

    omega: ObservationSet
    strategy: str
    ledger: BudgetLedger
    block: Optional[BlockConstraint] = None
    relations: tuple[ColumnRelation, ...] = ()
    tau: Optional[ColumnSet] = None
    seed: Optional[int] = None
    probes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        if self.strategy not in STRATEGIES:
            raise DomainError(f"unknown strategy {self.strategy!r}")
        if (self.block is not None) != (self.strategy == "optimal"):
            raise DomainError("a block constraint belongs to optimal plans only")
        if self.relations and self.strategy != "selective":
            raise DomainError("column relations belong to selective plans only")
        mask = self.omega.mask()
        if self.block is not None:
            if not mask[:, list(self.block.basis_cols)].all():
                raise DomainError("block basis columns must be fully observed")
            if mask[:, list(self.block.tau.members)].all(axis=1).sum() < self.block.k:
                raise DomainError("block coordinates are not backed by observed rows")
        for rel in self.relations:
            cols = list(rel.basis_cols) + [rel.target_col]
            if mask[:, cols].all(axis=1).sum() < rel.k:
                raise DomainError(f"relation for column {rel.target_col} is not backed by observed rows")


def _reveal_many(oracle: MatrixOracle, flat: np.ndarray, kind: str) -> None:
    n = oracle.shape[1]
    for f in flat.tolist():
        oracle.reveal(f // n, f % n, kind)


def _fill_uniform(oracle: MatrixOracle, count: int, rng: np.random.Generator, cols=None) -> int:
    """Reveal up to ``count`` fresh entries drawn uniformly from the unobserved part of ``cols``."""
    if count <= 0:
        return 0
    avail = ~oracle.observed_mask()
    if cols is not None:
        keep = np.zeros(oracle.shape[1], dtype=bool)
        keep[list(cols)] = True
        avail &= keep[None, :]
    candidates = np.flatnonzero(avail)
    take = min(count, candidates.size)
    if take:
        _reveal_many(oracle, rng.choice(candidates, size=take, replace=False), "uniform")
    return take


def _probe(oracle, rng, tau_members, k, rcond_tol):
    """One random ``k x k`` probe inside ``tau``; returns (I, J, S, fresh reveals)."""
    m = oracle.shape[0]
    before = oracle.spent
    I = np.sort(rng.choice(m, size=k, replace=False))
    J = np.sort(rng.choice(np.asarray(tau_members), size=k, replace=False))
    S = oracle.reveal_block(I, J, "structured")
    return I, J, S, oracle.spent - before, is_invertible(S, rcond_tol)


def default_num_relations(t: int, k: int) -> int:
    """Three quarters of the ``t - k`` recoverable relations, rounded up."""
    return min(t - k, -(-3 * (t - k) // 4))


def uniform_sample(oracle: MatrixOracle, count: int, rng: np.random.Generator, seed=None) -> SamplingPlan:
    """``count`` distinct entries drawn uniformly without replacement."""
    m, n = oracle.shape
    if not 0 <= count <= m * n:
        raise DomainError(f"count must lie in [0, {m * n}], got {count}")
    oracle.total_budget = count
    _fill_uniform(oracle, count - oracle.spent, rng)
    return SamplingPlan(oracle.observations(), "uniform", oracle.ledger(count), seed=seed)


def optimal_sample(
    oracle: MatrixOracle,
    tau: ColumnSet,
    k: int,
    total_budget: int,
    rng: np.random.Generator,
    *,
    max_probes: int = MAX_PROBES,
    rcond_tol: float = DEFAULT_RCOND,
    seed=None,
) -> SamplingPlan:
    """Recover the rank-``k`` block ``tau`` exactly from ``k(t+m-k)`` reveals, then sample the rest.

    Random ``k x k`` probes are drawn until one is invertible (failed probes are
    kept and counted as wasted). The probe's rows are then completed across
    ``tau``, which determines the coordinates ``B``, and the probe's columns are
    revealed in full. Leftover budget goes uniformly to the columns outside
    ``tau``, and only when those are exhausted to whatever else is unobserved.
    """
    m, n = oracle.shape
    t = len(tau)
    need = min_optimal_observations(k, t, m)
    if not 0 <= total_budget <= m * n:
        raise DomainError(f"budget must lie in [0, {m * n}], got {total_budget}")
    if total_budget < need:
        raise DomainError(f"budget {total_budget} below the {need} reveals the block needs")
    oracle.total_budget = total_budget
    members = list(tau.members)
    try:
        for attempt in range(1, max_probes + 1):
            I, J, S, fresh, ok = _probe(oracle, rng, members, k, rcond_tol)
            if ok:
                break
            oracle.wasted += fresh
        else:
            raise SamplingError(f"no invertible {k}x{k} probe in {max_probes} attempts", oracle.ledger())
        J_set = set(J.tolist())
        dependent = [j for j in members if j not in J_set]
        R = oracle.reveal_block(I, dependent, "structured")
        try:
            B = solve_square(S, R, rcond_tol)
        except NumericError as exc:
            raise SamplingError(f"coordinate solve failed: {exc}", oracle.ledger()) from exc
        rest = [i for i in range(m) if i not in set(I.tolist())]
        oracle.reveal_block(rest, J, "structured")
        left = total_budget - oracle.spent
        left -= _fill_uniform(oracle, left, rng, tau.complement())
        _fill_uniform(oracle, left, rng)
    except _OverBudget:
        raise SamplingError("budget exhausted during the structured phase", oracle.ledger()) from None
    block = BlockConstraint(tau, tuple(J.tolist()), B)
    return SamplingPlan(
        oracle.observations(), "optimal", oracle.ledger(total_budget),
        block=block, tau=tau, seed=seed, probes=attempt,
    )


def selective_sample(
    oracle: MatrixOracle,
    tau: ColumnSet,
    k: int,
    num_relations: int,
    total_budget: int,
    rng: np.random.Generator,
    *,
    max_probes: int = MAX_PROBES,
    rcond_tol: float = DEFAULT_RCOND,
    seed=None,
) -> SamplingPlan:
    """Discover ``num_relations`` single-column relations from ``k x k`` probes.

    Each successful probe ``(I, J)`` is paired with a not-yet-explained column
    ``l`` outside ``J``; revealing ``M[I, l]`` gives coordinates ``b`` with
    ``M[:, l] = M[:, J] @ b``. Sampling stops early if a further round might not
    fit in the budget. Leftover budget is spread uniformly over the unobserved
    entries of columns no relation explains; an explained column is already
    tied to its basis, so it is topped up only once the others are exhausted.
    """
    m, n = oracle.shape
    t = len(tau)
    if not 1 <= k <= min(m, t):
        raise DomainError(f"need 1 <= k <= min(m, t), got k={k}")
    if not 0 <= num_relations <= t - k:
        raise DomainError(f"at most t - k = {t - k} relations exist, asked for {num_relations}")
    if not 0 <= total_budget <= m * n:
        raise DomainError(f"budget must lie in [0, {m * n}], got {total_budget}")
    oracle.total_budget = total_budget
    members = list(tau.members)
    explained: list[int] = []
    relations: list[ColumnRelation] = []
    probes = failures = 0
    while len(relations) < num_relations and total_budget - oracle.spent >= k * k + k:
        I, J, S, fresh, ok = _probe(oracle, rng, members, k, rcond_tol)
        probes += 1
        if not ok:
            oracle.wasted += fresh
            failures += 1
            if failures >= max_probes:
                raise SamplingError(f"{max_probes} consecutive singular probes", oracle.ledger())
            continue
        failures = 0
        excluded = set(explained) | set(J.tolist())
        ell = int(rng.choice([j for j in members if j not in excluded]))
        rhs = oracle.reveal_block(I, [ell], "structured")[:, 0]
        try:
            b = solve_square(S, rhs, rcond_tol)
        except NumericError as exc:
            raise SamplingError(f"coordinate solve failed: {exc}", oracle.ledger()) from exc
        relations.append(ColumnRelation(tuple(J.tolist()), ell, b))
        explained.append(ell)
    left = total_budget - oracle.spent
    unexplained = [j for j in range(n) if j not in set(explained)]
    left -= _fill_uniform(oracle, left, rng, unexplained)
    _fill_uniform(oracle, left, rng)
    return SamplingPlan(
        oracle.observations(), "selective", oracle.ledger(total_budget),
        relations=tuple(relations), tau=tau, seed=seed, probes=probes,
    )


def plan_to_json(plan: SamplingPlan, indent: Optional[int] = None) -> str:
    """Serialize a plan; indices are written 1-based."""
    om = plan.omega
    doc = {
        "shape": list(om.shape),
        "strategy": plan.strategy,
        "seed": plan.seed,
        "indices": [[i + 1, j + 1] for i, j in zip(om.rows.tolist(), om.cols.tolist())],
        "values": om.values.tolist(),
        "tau": None if plan.tau is None else [j + 1 for j in plan.tau.members],
        "block": None,
        "relations": [
            {
                "basis_cols": [j + 1 for j in r.basis_cols],
                "target_col": r.target_col + 1,
                "coords": list(r.coords),
            }
            for r in plan.relations
        ],
        "ledger": plan.ledger.as_dict(),
        "probes": plan.probes,
    }
    if plan.block is not None:
        doc["block"] = {
            "basis_cols": [j + 1 for j in plan.block.basis_cols],
            "coords": plan.block.coords.tolist(),
        }
    return json.dumps(doc, indent=indent)


def plan_from_json(text: str) -> SamplingPlan:
    doc = json.loads(text)
    m, n = doc["shape"]
    idx = np.array(doc["indices"], dtype=np.int64).reshape(-1, 2) - 1
    omega = ObservationSet((m, n), idx[:, 0], idx[:, 1], np.array(doc["values"], dtype=float))
    tau = None if doc.get("tau") is None else ColumnSet(n, tuple(j - 1 for j in doc["tau"]))
    block = None
    if doc.get("block") is not None:
        J = tuple(j - 1 for j in doc["block"]["basis_cols"])
        coords = np.array(doc["block"]["coords"], dtype=float).reshape(len(J), len(tau) - len(J))
        block = BlockConstraint(tau, J, coords)
    relations = tuple(
        ColumnRelation(tuple(j - 1 for j in r["basis_cols"]), r["target_col"] - 1, r["coords"])
        for r in doc.get("relations", [])
    )
    return SamplingPlan(
        omega, doc["strategy"], BudgetLedger(**doc["ledger"]),
        block=block, relations=relations, tau=tau, seed=doc.get("seed"), probes=doc.get("probes", 0),
    )
