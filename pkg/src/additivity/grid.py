"""Structured test grids over feature groups.

Points are the Cartesian product of group levels in lexicographic order with
the last group varying fastest, i.e. point ``(i_1, ..., i_g)`` sits at flat
index ``i_1 * (N_2 ... N_g) + ... + i_g``.  Difference matrices in
:mod:`additivity.design` assume exactly this order.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PartitionError
from .tree import Dataset

EDGE_FRACTION = 0.05


class EdgeLevelWarning(UserWarning):
    """A grid level sits close to the boundary of a feature's observed range."""


@dataclass(frozen=True)
class FeatureGroup:
    """A set of features that moves together on the grid.

    ``levels`` has one row per level and one column per member feature.
    """

    members: tuple[int, ...]
    levels: np.ndarray

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if not members:
            raise PartitionError("feature group has no members")
        levels = np.asarray(self.levels, dtype=np.float64)
        if levels.ndim == 1:
            levels = levels.reshape(-1, 1) if len(members) == 1 else levels.reshape(1, -1)
        if levels.ndim != 2 or levels.shape[0] < 1:
            raise DomainError("feature group needs at least one level")
        if levels.shape[1] != len(members):
            raise DomainError(
                f"level vectors have length {levels.shape[1]}, group has {len(members)} members"
            )
        if not np.all(np.isfinite(levels)):
            raise DomainError("levels must be finite")
        levels.setflags(write=False)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def scalar(cls, feature: int, levels: Sequence[float]) -> FeatureGroup:
        return cls((feature,), np.asarray(levels, dtype=np.float64).reshape(-1, 1))

    @property
    def n_levels(self) -> int:
        return self.levels.shape[0]


@dataclass(frozen=True)
class TestGrid:
    groups: tuple[FeatureGroup, ...]
    points: np.ndarray
    shape: tuple[int, ...]

    __test__ = False  # not a pytest class

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_features(self) -> int:
        return self.points.shape[1]

    def flat_index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def describe(self) -> list[dict]:
        """One record per grid point (used by the CLI preview)."""
        out = []
        for flat in range(self.n_points):
            out.append(
                {
                    "index": flat,
                    "levels": list(self.multi_index(flat)),
                    "point": self.points[flat].tolist(),
                }
            )
        return out


def make_grid(groups: Sequence[FeatureGroup], n_features: int | None = None) -> TestGrid:
    """Cartesian product of group levels, last group fastest.

    The groups must partition ``{0, ..., d-1}`` where ``d`` is ``n_features``
    (default: the number of distinct member indices).
    """
    groups = tuple(groups)
    if not groups:
        raise PartitionError("at least one feature group is required")
    members = [m for g in groups for m in g.members]
    if len(set(members)) != len(members):
        raise PartitionError(f"feature appears in more than one group: {members}")
    d = len(members) if n_features is None else int(n_features)
    if sorted(members) != list(range(d)):
        raise PartitionError(f"groups {members} do not partition features 0..{d - 1}")

    shape = tuple(g.n_levels for g in groups)
    points = np.empty((int(np.prod(shape)), d), dtype=np.float64)
    for flat, combo in enumerate(itertools.product(*(range(s) for s in shape))):
        for g, level in zip(groups, combo):
            points[flat, list(g.members)] = g.levels[level]
    points.setflags(write=False)
    return TestGrid(groups, points, shape)


def quantile_levels(data: Dataset | np.ndarray, feature: int, probs: Sequence[float]) -> np.ndarray:
    """Empirical quantiles of one feature, interpolating linearly between order statistics."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise DomainError("probs must be a nonempty list")
    if np.any(probs <= 0) or np.any(probs >= 1) or np.any(np.diff(probs) <= 0):
        raise DomainError("probs must be strictly increasing inside (0, 1)")
    x = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if x.size == 0:
        raise DomainError("cannot take quantiles of an empty dataset")
    column = x[:, feature] if x.ndim == 2 else x
    return np.quantile(column, probs, method="linear")


def quantile_group(data: Dataset, members: Sequence[int], probs: Sequence[float]) -> FeatureGroup:
    """Group whose l-th level is the vector of each member's ``probs[l]`` quantile."""
    cols = [quantile_levels(data, m, probs) for m in members]
    return FeatureGroup(tuple(members), np.column_stack(cols))


def edge_levels(grid: TestGrid, data: Dataset, fraction: float = EDGE_FRACTION) -> list[tuple[int, float]]:
    """(feature, level) pairs lying within ``fraction`` of the observed range boundary."""
    flagged = []
    for g in grid.groups:
        for col, feat in enumerate(g.members):
            lo = data.features[:, feat].min()
            hi = data.features[:, feat].max()
            margin = fraction * (hi - lo)
            for value in np.unique(g.levels[:, col]):
                if value < lo + margin or value > hi - margin:
                    flagged.append((feat, float(value)))
    return flagged


def check_interior(grid: TestGrid, data: Dataset, fraction: float = EDGE_FRACTION) -> list[tuple[int, float]]:
    """Warn about grid levels near the edge of the data, where trees are biased."""
    flagged = edge_levels(grid, data, fraction)
    if flagged:
        names = ", ".join(f"{data.feature_names[f]}={v:g}" for f, v in flagged)
        warnings.warn(f"grid levels near the edge of the feature range: {names}", EdgeLevelWarning, stacklevel=2)
    return flagged
