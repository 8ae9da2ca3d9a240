"""
A small Monte Carlo campaign
============================

Replications are seeded from (seed, replication index), so a campaign gives
the same answer on any number of threads.
"""

from additivity import SimSpec, run_campaign

for function_id in ("x1", "x1x2"):
    spec = SimSpec(function_id, n=500, k=50, n_tilde=25, n_mc=100, replications=20, seed=5)
    res = run_campaign(spec, threads=None)
    print(f"{function_id:5s} rejection rate {res.rejection_rate:.2f} +/- {res.binomial_se:.2f}  ({res.wall_time:.0f}s)")

# The classical baseline: a t-test on the interaction coefficient of a linear model.
for beta in (0.0, 1.0):
    spec = SimSpec("linear-interaction", beta=beta, n=250, method="ols", replications=200, seed=5)
    print(f"OLS, beta={beta}: rejection rate {run_campaign(spec).rejection_rate:.3f}")
