"""
Significance, total and partial additivity
==========================================

Three questions about the same kind of data, each answered with a chi-square
test on contrasts of the ensemble predictions over a grid.
"""

import numpy as np

from additivity import Dataset, FeatureGroup, InternalConfig, RngStream, end_to_end_test, make_grid

gen = RngStream(seed=3).generator()
cfg = InternalConfig(k=50, n_tilde=25, n_mc=100, rng=RngStream(3, 1))


def simulate(fn, d):
    x = gen.uniform(size=(500, d))
    return Dataset(x, fn(x) + 0.05 * gen.standard_normal(500))


def show(label, report):
    verdict = "reject" if report.reject else "keep"
    print(f"{label:42s} stat {report.statistic:8.2f}  df {report.df:2d}  p {report.p_value:.3g}  -> {verdict}")


# Does x2 matter once x1 is known?  Two groups: reduced (x1) and additional (x2).
lv = [0.2, 0.4, 0.6, 0.8]
grid2 = make_grid([FeatureGroup.scalar(0, lv), FeatureGroup.scalar(1, lv)])
show("significance of x2, y = exp(x1)", end_to_end_test(simulate(lambda x: np.exp(x[:, 0]), 2), grid2, "significance", cfg=cfg))
show("significance of x2, y = x1 + x2", end_to_end_test(simulate(lambda x: x[:, 0] + x[:, 1], 2), grid2, "significance", cfg=cfg))

# Is the function a sum of one-dimensional pieces?
show("total additivity, y = x1 + x2", end_to_end_test(simulate(lambda x: x[:, 0] + x[:, 1], 2), grid2, "total", cfg=cfg))
show("total additivity, y = x1 x2", end_to_end_test(simulate(lambda x: x[:, 0] * x[:, 1], 2), grid2, "total", cfg=cfg))

# Do x1 and x2 interact, allowing both to interact with x3?  A 3x3x3 grid is
# coarse, so the three-way product is often missed here; the projection demo
# runs the same question on a 5x5x5 grid.
lv3 = [0.3, 0.5, 0.7]
grid3 = make_grid([FeatureGroup.scalar(i, lv3) for i in range(3)])
show("partial additivity, y = x1 x3 + x2 x3", end_to_end_test(simulate(lambda x: x[:, 0] * x[:, 2] + x[:, 1] * x[:, 2], 3), grid3, "partial", cfg=cfg))
show("partial additivity, y = x1 x2 x3", end_to_end_test(simulate(lambda x: x[:, 0] * x[:, 1] * x[:, 2], 3), grid3, "partial", cfg=cfg))
