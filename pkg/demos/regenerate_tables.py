"""
Regenerate the full simulation tables offline
=============================================

Three campaigns, each written as newline-delimited JSON (one summary record
per model) plus a plain-text table on stdout:

* ``linear``: y = x1 + x2 + beta x1 x2 with beta = 0 (alpha-level) and
  beta = 1 (power), n in {250, 500, 1000} with k in {30, 50, 75}, for both the
  ensemble test and the OLS interaction t-test.
* ``ensemble``: the fourteen alpha-level / power models, n = 500, k = 50,
  a 4x4 grid (two features) or a 3x3x3 grid (three features).
* ``projection``: the same models on a 10x10 or 5x5x5 grid with M = 1000
  projections of dimension 5.

At the full 1000 replications with n_tilde = 50 and n_mc = 250 this takes
days on one core; use ``--reps`` and ``--threads`` to budget.

    python demos/regenerate_tables.py --reps 1000 --threads 8 --out results/
"""

import argparse
import json
from pathlib import Path

from additivity.simlab import SimSpec, run_campaign, table_models


def campaigns(which, reps, n_tilde, n_mc, seed):
    if which == "linear":
        for n, k in [(250, 30), (500, 50), (1000, 75)]:
            for beta in (0.0, 1.0):
                role = "alpha" if beta == 0 else "power"
                for method in ("ensemble", "ols"):
                    yield f"linear n={n} {method} {role}", SimSpec(
                        "linear-interaction", n=n, k=k, n_tilde=n_tilde, n_mc=n_mc, beta=beta,
                        method=method, replications=reps, seed=seed,
                    )
    else:
        method = "projection" if which == "projection" else "ensemble"
        for model in table_models(2, "alpha") + table_models(2, "power"):
            yield f"{model.role:5s} {model.kind:7s} {model.formula}", SimSpec(
                model.id, n=500, k=50, n_tilde=n_tilde, n_mc=n_mc, method=method, M=1000, r=5,
                replications=reps, seed=seed,
            )


def main():
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--table", choices=("linear", "ensemble", "projection", "all"), default="all")
    parser.add_argument("--reps", type=int, default=1000)
    parser.add_argument("--n-tilde", type=int, default=50)
    parser.add_argument("--n-mc", type=int, default=250)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("table_results"))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    tables = ["linear", "ensemble", "projection"] if args.table == "all" else [args.table]
    for which in tables:
        print(f"\n== {which} ==")
        with (args.out / f"{which}.ndjson").open("w") as fh:
            for label, spec in campaigns(which, args.reps, args.n_tilde, args.n_mc, args.seed):
                res = run_campaign(spec, threads=args.threads)
                summary = res.rows()[-1]
                summary["label"] = label
                fh.write(json.dumps(summary) + "\n")
                fh.flush()
                print(f"{label:60s} {res.rejection_rate:.3f} (se {res.binomial_se:.3f}, {res.wall_time:.0f}s)")


if __name__ == "__main__":
    main()
