"""
Trees and the internal variance estimate
========================================

Every tree is fit on a subsample of size k.  Trees come in groups that share
one fixed training point; the spread of the group averages and the spread of
all trees combine into the covariance of the ensemble prediction.
"""

import numpy as np

from additivity import Dataset, FeatureGroup, InternalConfig, RngStream, TreeConfig
from additivity import build_internal, estimate_covariance, fit_tree, make_grid

gen = RngStream(seed=7).generator()
x = gen.uniform(size=(500, 2))
y = x[:, 0] * x[:, 1] + 0.05 * gen.standard_normal(500)
data = Dataset(x, y, feature_names=("x1", "x2"), response_name="y")

# A single CART tree on the full data.
tree = fit_tree(data, config=TreeConfig(min_node_size=5))
print(f"one tree: {tree.n_leaves} leaves, depth {tree.depth}")

# The 16-point test grid and an ensemble of 25 x 100 trees.
levels = [0.2, 0.4, 0.6, 0.8]
grid = make_grid([FeatureGroup.scalar(0, levels), FeatureGroup.scalar(1, levels)])
fit = build_internal(data, grid, cfg=InternalConfig(k=50, n_tilde=25, n_mc=100, rng=RngStream(7, 1)))
cov = estimate_covariance(fit)

truth = grid.points[:, 0] * grid.points[:, 1]
print("ensemble prediction vs truth on the grid:")
for p, v, t, s in zip(grid.points, fit.mean, truth, np.sqrt(np.diag(cov.combined))):
    print(f"  x=({p[0]:.1f}, {p[1]:.1f})  fit {v:6.3f}  truth {t:6.3f}  se {s:.3f}")

# The two pieces of the combined covariance, on the diagonal.
print("mean one-point variance:", np.diag(cov.sigma1).mean())
print("mean per-tree variance: ", np.diag(cov.sigmakk).mean())
