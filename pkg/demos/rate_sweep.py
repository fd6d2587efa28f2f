"""
Error against observation rate
==============================

On a 30 x 30 matrix the optimal design cannot even start until the budget
covers the block. Sweeping the rate shows where it pays off for a small and
a larger block rank. Ten trials per point keeps this under a minute or two.
"""

from selective_mc.harness import aggregate, figure_grid, run_sweep

grid = figure_grid("fig4", trials=10)
aggs = aggregate(run_sweep(grid))

for k in grid.k_values:
    print(f"k = {k}")
    print("   p   uniform   optimal")
    for p in grid.p_values:
        u, o = (next(a for a in aggs if (a.k, a.p, a.strategy) == (k, p, s)) for s in ("uniform", "optimal"))
        opt = "   (budget too small)" if o.valid == 0 else f"{o.mean_error:9.4f}"
        print(f"{p:5.2f} {u.mean_error:9.4f} {opt}")
