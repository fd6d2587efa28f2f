"""Paired Monte-Carlo comparison of the sampling strategies.

Trial ``i`` of every strategy in a cell uses seed ``base_seed + i``: the same
matrix and the same sampler stream, so per-cell gains are paired comparisons.
Rows are always emitted in (cell, strategy, trial) order, whatever the number
of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import CompletionError, min_optimal_observations
from .linalg import operator_norm
from .sampling import (
    STRATEGIES,
    MatrixOracle,
    SamplingPlan,
    default_num_relations,
    optimal_sample,
    selective_sample,
    uniform_sample,
)
from .solver import CompletionProblem, SolverOptions, SolveReport, relative_error, solve, solve_decoupled
from .synth import InstanceSpec, generate, seed_streams

__all__ = [
    "CSV_FIELDS",
    "AGGREGATE_FIELDS",
    "TrialRecord",
    "SweepGrid",
    "Aggregate",
    "budget_for",
    "build_plan",
    "run_trial",
    "accuracy_gain",
    "run_sweep",
    "aggregate",
    "records_to_csv",
    "aggregates_to_csv",
    "figure_grid",
    "figure_points",
]

CSV_FIELDS = (
    "m", "n", "t", "k", "r_rest", "p", "strategy", "trial", "seed", "rel_error",
    "obs_used", "wasted", "iters", "converged", "below_budget", "wall_ms",
)
AGGREGATE_FIELDS = (
    "m", "n", "t", "k", "r_rest", "p", "strategy", "trials", "valid",
    "mean_error", "gain_pct", "below_budget", "failed", "nonconverged",
)
NA = "NA"


def budget_for(p: float, m: int, n: int) -> int:
    """``floor(p m n)``, robust to ``p m n`` landing a rounding error below an integer."""
    return int(math.floor(p * m * n + 1e-9))


@dataclass
class TrialRecord:
    """Outcome of one (instance, strategy, seed) run.

    ``rel_error`` is NaN when no reconstruction exists (below budget or a
    captured failure); ``error`` then says why.
    """

    m: int
    n: int
    t: int
    k: int
    r_rest: int
    p: float
    strategy: str
    trial: int
    seed: int
    rel_error: float = float("nan")
    obs_used: int = 0
    wasted: int = 0
    iters: int = 0
    converged: bool = False
    below_budget: bool = False
    wall_ms: float = 0.0
    tau_error: float = float("nan")
    spent_structured: int = 0
    probes: int = 0
    num_relations: int = 0
    error: str = ""

    @property
    def valid(self) -> bool:
        return not self.below_budget and not self.error and math.isfinite(self.rel_error)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over ``t``, ``k`` and ``p`` for fixed ``m``, ``n``, ``r_rest``.

    Cells with ``k > t`` are skipped. ``num_relations=None`` uses
    :func:`default_num_relations` per cell.
    """

    t_values: tuple[int, ...]
    k_values: tuple[int, ...]
    p_values: tuple[float, ...]
    trials: int = 100
    base_seed: int = 0
    m: int = 50
    n: int = 50
    r_rest: int = 4
    strategies: tuple[str, ...] = STRATEGIES
    num_relations: Optional[int] = None
    mode: str = "gaussian"

    def __post_init__(self):
        for name in ("t_values", "k_values", "p_values", "strategies"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(not 0 <= p <= 1 for p in self.p_values):
            raise ValueError("observation rates must lie in [0, 1]")
        unknown = set(self.strategies) - set(STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")

    def cells(self) -> list[tuple[int, int, float]]:
        return [(t, k, p) for t, k, p in product(self.t_values, self.k_values, self.p_values) if k <= t]


def build_plan(
    M: np.ndarray,
    spec: InstanceSpec,
    strategy: str,
    budget: int,
    rng: np.random.Generator,
    num_relations: Optional[int] = None,
    seed: Optional[int] = None,
) -> SamplingPlan:
    oracle = MatrixOracle(M)
    if strategy == "uniform":
        return uniform_sample(oracle, budget, rng, seed=seed)
    if strategy == "optimal":
        return optimal_sample(oracle, spec.tau, spec.k, budget, rng, seed=seed)
    if strategy == "selective":
        L = default_num_relations(spec.t, spec.k) if num_relations is None else num_relations
        return selective_sample(oracle, spec.tau, spec.k, L, budget, rng, seed=seed)
    raise ValueError(f"unknown strategy {strategy!r}")


def solve_plan(plan: SamplingPlan, opts: SolverOptions = SolverOptions()) -> SolveReport:
    """Solve a plan's completion problem; optimal plans take the decoupled path."""
    problem = CompletionProblem(plan.omega, plan.block, plan.relations)
    if plan.block is not None:
        return solve_decoupled(problem, opts)
    return solve(problem, opts)


def run_trial(
    spec: InstanceSpec,
    p: float,
    strategy: str,
    seed: int,
    *,
    trial: int = 0,
    num_relations: Optional[int] = None,
    opts: SolverOptions = SolverOptions(),
    keep: Optional[dict] = None,
) -> TrialRecord:
    """Generate the instance for ``seed``, sample it with ``strategy`` at rate ``p``, solve, score.

    Sampler and solver errors are stored on the record, never raised. Pass a
    dict as ``keep`` to receive the matrix, plan and solve report.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"observation rate must lie in [0, 1], got {p}")
    spec = replace(spec, seed=seed)
    rec = TrialRecord(spec.m, spec.n, spec.t, spec.k, spec.r_rest, p, strategy, trial, seed)
    budget = budget_for(p, spec.m, spec.n)
    if strategy == "optimal" and budget < min_optimal_observations(spec.k, spec.t, spec.m):
        rec.below_budget = True
        return rec
    start = time.perf_counter()
    try:
        M, tau = generate(spec)
        if keep is not None:
            keep["M"] = M
        plan = build_plan(M, spec, strategy, budget, seed_streams(seed)[1], num_relations, seed)
        rec.obs_used = len(plan.omega)
        rec.wasted = plan.ledger.wasted
        rec.spent_structured = plan.ledger.spent_structured
        rec.probes = plan.probes
        rec.num_relations = len(plan.relations)
        report = solve_plan(plan, opts)
        rec.rel_error = relative_error(report.X_hat, M)
        cols = list(tau.members)
        rec.tau_error = operator_norm(report.X_hat[:, cols] - M[:, cols])
        rec.iters = report.iterations
        rec.converged = report.converged
        if keep is not None:
            keep.update(plan=plan, report=report)
    except CompletionError as exc:
        ledger = getattr(exc, "ledger", None)
        if ledger is not None:
            rec.wasted = ledger.wasted
            rec.spent_structured = ledger.spent_structured
            rec.obs_used = ledger.spent
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_ms = (time.perf_counter() - start) * 1e3
    return rec


def accuracy_gain(err_uniform: float, err_method: float) -> float:
    """Relative error reduction against uniform sampling, in percent.

    Returns NaN when ``err_uniform`` is zero or either error is missing.
    """
    if not (math.isfinite(err_uniform) and math.isfinite(err_method)) or err_uniform == 0:
        return float("nan")
    return 100.0 * (err_uniform - err_method) / err_uniform


def _tasks(grid: SweepGrid):
    for t, k, p in grid.cells():
        spec = InstanceSpec(grid.m, grid.n, t, k, grid.r_rest, 0, grid.mode)
        for strategy in grid.strategies:
            for i in range(grid.trials):
                yield spec, p, strategy, grid.base_seed + i, i, grid.num_relations


def _run_task(task, opts: SolverOptions = SolverOptions()) -> TrialRecord:
    spec, p, strategy, seed, i, L = task
    return run_trial(spec, p, strategy, seed, trial=i, num_relations=L, opts=opts)


def run_sweep(grid: SweepGrid, workers: int = 1, opts: SolverOptions = SolverOptions()) -> list[TrialRecord]:
    """One record per (cell, strategy, trial), in that order."""
    tasks = list(_tasks(grid))
    if workers <= 1:
        return [_run_task(task, opts) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, [opts] * len(tasks), chunksize=4))


@dataclass
class Aggregate:
    m: int
    n: int
    t: int
    k: int
    r_rest: int
    p: float
    strategy: str
    trials: int
    valid: int
    mean_error: float
    gain_pct: float
    below_budget: int
    failed: int
    nonconverged: int
    errors: list = field(default_factory=list, repr=False)


def aggregate(records: Iterable[TrialRecord]) -> list[Aggregate]:
    """Per (cell, strategy) mean error over valid trials and the gain against uniform."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.m, r.n, r.t, r.k, r.r_rest, r.p, r.strategy), []).append(r)
    out = []
    for key, recs in groups.items():
        errs = [r.rel_error for r in recs if r.valid]
        mean = float(np.mean(errs)) if errs else float("nan")
        out.append(Aggregate(
            *key, trials=len(recs), valid=len(errs), mean_error=mean, gain_pct=float("nan"),
            below_budget=sum(r.below_budget for r in recs),
            failed=sum(bool(r.error) for r in recs),
            nonconverged=sum(r.valid and not r.converged for r in recs),
            errors=errs,
        ))
    uniform = {_cell_key(a): a.mean_error for a in out if a.strategy == "uniform"}
    for a in out:
        if _cell_key(a) in uniform:
            a.gain_pct = accuracy_gain(uniform[_cell_key(a)], a.mean_error)
    return out


def _cell_key(a) -> tuple:
    return (a.m, a.n, a.t, a.k, a.r_rest, a.p)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return NA if math.isnan(v) else repr(v)
    return str(v)


def records_to_csv(records: Iterable[TrialRecord], timing: bool = False) -> str:
    """CSV text in :data:`CSV_FIELDS` order.

    ``wall_ms`` is left empty unless ``timing`` is set, so that repeated runs
    produce identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        row = [_fmt(getattr(r, f)) for f in CSV_FIELDS]
        if not timing:
            row[-1] = ""
        w.writerow(row)
    return buf.getvalue()


def aggregates_to_csv(aggs: Iterable[Aggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_FIELDS)
    for a in aggs:
        w.writerow([_fmt(getattr(a, f)) for f in AGGREGATE_FIELDS])
    return buf.getvalue()


def figure_grid(name: str, trials: int = 100, base_seed: int = 0) -> SweepGrid:
    """Canned grids for the three published comparisons."""
    if name == "fig2":
        return SweepGrid((20,), (2,), (0.3,), trials, base_seed)
    if name == "fig3":
        return SweepGrid(
            (5, 10, 15, 20, 25), tuple(range(1, 11)), (0.3,), trials, base_seed,
            strategies=("uniform", "optimal"),
        )
    if name == "fig4":
        ps = tuple(round(0.05 * i, 2) for i in range(1, 21))
        return SweepGrid((10,), (1, 4), ps, trials, base_seed, m=30, n=30, strategies=("uniform", "optimal"))
    raise ValueError(f"unknown figure {name!r}")


def figure_points(name: str, aggs: Sequence[Aggregate]) -> str:
    """Plot-ready CSV, one row per plotted point.

    fig2: mean error and gain per strategy. fig3: optimal-sampling gain per
    ``(t, k)``. fig4: mean error per ``(k, p, strategy)``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if name == "fig2":
        w.writerow(("strategy", "mean_error", "gain_pct", "valid"))
        for a in aggs:
            w.writerow((a.strategy, _fmt(a.mean_error), _fmt(a.gain_pct), a.valid))
    elif name == "fig3":
        w.writerow(("t", "k", "gain_pct", "mean_error_uniform", "mean_error_optimal"))
        uni = {_cell_key(a): a for a in aggs if a.strategy == "uniform"}
        for a in aggs:
            if a.strategy == "optimal":
                w.writerow((a.t, a.k, _fmt(a.gain_pct), _fmt(uni[_cell_key(a)].mean_error), _fmt(a.mean_error)))
    elif name == "fig4":
        w.writerow(("k", "p", "strategy", "mean_error", "below_budget"))
        for a in sorted(aggs, key=lambda a: (a.k, a.strategy != "uniform", a.p)):
            w.writerow((a.k, _fmt(a.p), a.strategy, _fmt(a.mean_error), a.below_budget))
    else:
        raise ValueError(f"unknown figure {name!r}")
    return buf.getvalue()
