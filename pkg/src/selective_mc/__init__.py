"""Low-rank matrix completion with designed observation sets.

Nuclear-norm minimization under observation and column-relation constraints,
three ways of choosing which entries to observe (uniform, optimal, selective),
and a paired Monte-Carlo harness comparing them.
"""

from .core import (
    BlockConstraint,
    BudgetLedger,
    ColumnRelation,
    ColumnSet,
    CompletionError,
    ConstraintError,
    DimensionError,
    DomainError,
    NumericError,
    ObservationSet,
    SamplingError,
    min_optimal_observations,
    project_observed,
)
from .harness import SweepGrid, TrialRecord, accuracy_gain, aggregate, run_sweep, run_trial
from .linalg import is_invertible, nuclear_norm, operator_norm, solve_square, svd, svt
from .sampling import (
    MatrixOracle,
    SamplingPlan,
    optimal_sample,
    plan_from_json,
    plan_to_json,
    selective_sample,
    uniform_sample,
)
from .solver import CompletionProblem, SolverOptions, SolveReport, relative_error, solve, solve_decoupled
from .synth import InstanceSpec, generate

__version__ = "0.1.0"
