"""
Reference distributions
=======================

The grid tests compare a quadratic form with a chi-square law, and the
projection test compares an average of p-values with the Bates law (the mean
of M independent uniforms).  Both are computed in-house; this script prints
the critical values used throughout.
"""

import numpy as np

from additivity.numerics import (
    RngStream,
    bates_quantile,
    chi_sq_quantile,
    chi_sq_sf,
    gram_schmidt_columns,
)

# A 4x4 grid leaves 9 degrees of freedom for the total-additivity test and a
# 3x3x3 grid leaves 12 for the partial test.
for df in (9, 12):
    print(f"chi-square 95% quantile, df={df:2d}: {chi_sq_quantile(0.95, df):.3f}")

# A statistic of 52.3 on 9 degrees of freedom is far in the tail.
print(f"P(chi2_9 > 52.3) = {chi_sq_sf(52.3, 9):.2e}")

# The averaged p-value concentrates around 1/2 as M grows, so the lower 5%
# point of its null law moves towards 1/2.
for m in (1, 10, 100, 1000):
    print(f"Bates 5% quantile, M={m:4d}: {bates_quantile(0.05, m):.4f}")

# Random projections are orthonormalized Gaussian draws.
gen = RngStream(seed=1).generator()
r = gram_schmidt_columns(gen.standard_normal((12, 5)))
print("max |R^T R - I| =", np.abs(r.T @ r - np.eye(5)).max())
