"""
Recovering a low-rank column block from k(t + m - k) entries
============================================================

Walks through the optimal design step by step on a small matrix, then
finishes the remaining columns with nuclear-norm minimization.
"""

import numpy as np

from selective_mc.synth import InstanceSpec, generate, seed_streams
from selective_mc.core import min_optimal_observations
from selective_mc.sampling import MatrixOracle, optimal_sample
from selective_mc.solver import CompletionProblem, relative_error, solve_decoupled

spec = InstanceSpec(m=12, n=10, t=6, k=2, r_rest=2, seed=4)
M, tau = generate(spec)
print("block columns:", list(tau.members))
print("entries needed for the block:", min_optimal_observations(spec.k, spec.t, spec.m))

# the oracle only hands out entries we pay for
oracle = MatrixOracle(M)
plan = optimal_sample(oracle, tau, spec.k, total_budget=60, rng=seed_streams(spec.seed)[1])
block = plan.block
print("basis columns:", block.basis_cols, "after", plan.probes, "probe(s)")
print("coordinates B (k x (t - k)):")
print(np.round(block.coords, 3))

# revealed pattern: full basis columns, k full rows across the block, scattered rest
mask = plan.omega.mask()
for row in mask.astype(int):
    print("".join(".#"[v] for v in row))
print(plan.ledger.as_dict())

# block columns follow from the basis columns, the rest is completed
report = solve_decoupled(CompletionProblem(plan.omega, plan.block))
X = report.X_hat
print("block error:", np.abs(X[:, :spec.t] - M[:, :spec.t]).max())
print("overall relative error:", relative_error(X, M))
