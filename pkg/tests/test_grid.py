import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from additivity.errors import DomainError, PartitionError
from additivity.grid import (
    EdgeLevelWarning,
    FeatureGroup,
    check_interior,
    make_grid,
    quantile_group,
    quantile_levels,
)
from additivity.tree import Dataset

LEVELS = [0.2, 0.4, 0.6, 0.8]


def test_two_scalar_groups():
    grid = make_grid([FeatureGroup.scalar(0, LEVELS), FeatureGroup.scalar(1, LEVELS)])
    assert grid.n_points == 16 and grid.shape == (4, 4)
    np.testing.assert_allclose(grid.points[0], [0.2, 0.2])
    np.testing.assert_allclose(grid.points[1], [0.2, 0.4])
    np.testing.assert_allclose(grid.points[4], [0.4, 0.2])


def test_single_point():
    grid = make_grid([FeatureGroup.scalar(0, [0.5])])
    assert grid.n_points == 1


def test_three_by_three_by_three_lexicographic():
    lv = [0.3, 0.5, 0.7]
    grid = make_grid([FeatureGroup.scalar(i, lv) for i in range(3)])
    expected = np.array(list(itertools.product(lv, lv, lv)))
    np.testing.assert_allclose(grid.points, expected)


def test_vector_groups_and_partition():
    g1 = FeatureGroup((0, 2), [[0.1, 10.0], [0.2, 20.0]])
    g2 = FeatureGroup.scalar(1, [5.0, 6.0, 7.0])
    grid = make_grid([g1, g2])
    assert grid.shape == (2, 3)
    np.testing.assert_allclose(grid.points[3], [0.2, 5.0, 20.0])
    with pytest.raises(PartitionError):
        make_grid([g1, FeatureGroup.scalar(0, [1.0])])
    with pytest.raises(PartitionError):
        make_grid([FeatureGroup.scalar(0, [1.0]), FeatureGroup.scalar(2, [1.0])])


@given(st.lists(st.integers(1, 5), min_size=1, max_size=4))
def test_index_round_trip(shape):
    grid = make_grid([FeatureGroup.scalar(i, np.arange(s, dtype=float)) for i, s in enumerate(shape)])
    assert grid.n_points == int(np.prod(shape))
    for flat in range(grid.n_points):
        multi = grid.multi_index(flat)
        assert grid.flat_index(multi) == flat
        np.testing.assert_array_equal(grid.points[flat], multi)


def test_quantile_levels():
    data = np.arange(1.0, 101.0).reshape(-1, 1)
    assert quantile_levels(data, 0, [0.5])[0] == pytest.approx(50.5)
    assert np.all(quantile_levels(np.full((7, 1), 3.0), 0, [0.1, 0.9]) == 3.0)
    np.testing.assert_allclose(quantile_levels(np.linspace(0, 1, 101).reshape(-1, 1), 0, [0.2, 0.8]), [0.2, 0.8])
    with pytest.raises(DomainError):
        quantile_levels(data, 0, [0.5, 0.4])
    with pytest.raises(DomainError):
        quantile_levels(np.empty((0, 1)), 0, [0.5])


def test_quantile_group_uses_same_prob_per_member(rng):
    x = rng.uniform(size=(500, 3))
    data = Dataset(x, x.sum(axis=1))
    g = quantile_group(data, (0, 2), [0.25, 0.75])
    np.testing.assert_allclose(g.levels[:, 1], np.quantile(x[:, 2], [0.25, 0.75]))


def test_edge_warning():
    x = np.linspace(0, 1, 101).reshape(-1, 1)
    x = np.hstack([x, x])
    data = Dataset(x, x[:, 0])
    inner = make_grid([FeatureGroup.scalar(0, LEVELS), FeatureGroup.scalar(1, LEVELS)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_interior(inner, data) == []
    edgy = make_grid([FeatureGroup.scalar(0, [0.02, 0.5]), FeatureGroup.scalar(1, LEVELS)])
    with pytest.warns(EdgeLevelWarning):
        assert check_interior(edgy, data) == [(0, 0.02)]
