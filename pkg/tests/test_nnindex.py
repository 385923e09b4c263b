import numpy as np
import pytest

from brachyplan.errors import InputError
from brachyplan.nnindex import build_nn_index
from oracles import linear_scan_nn


def test_single_point_cloud_answers_everything():
    index = build_nn_index(np.array([[1.0, 2.0, 3.0]]))
    for q in ([0, 0, 0], [100, -5, 3], [1, 2, 3]):
        i, d = index.query_one(np.asarray(q, dtype=float))
        assert i == 0
        assert d == np.linalg.norm(np.asarray(q, dtype=float) - [1.0, 2.0, 3.0])


def test_lattice_point_query_distance_zero():
    xs = np.arange(10, dtype=float)
    grid = np.array([[x, y, z] for x in xs for y in xs for z in xs])
    index = build_nn_index(grid)
    i, d = index.query_one(np.array([3.0, 7.0, 2.0]))
    assert d == 0.0
    assert np.allclose(grid[i], [3.0, 7.0, 2.0])


def test_matches_linear_scan(rng):
    pts = rng.uniform(-100, 100, size=(5000, 3))
    queries = rng.uniform(-120, 120, size=(500, 3))
    index = build_nn_index(pts)
    got_i, got_d = index.query(queries)
    want_i, want_d = linear_scan_nn(pts, queries)
    assert np.array_equal(got_i, want_i)
    assert np.array_equal(got_d, want_d)


def test_tie_broken_by_lowest_index():
    # query at the midpoint of a segment: both ends equidistant
    pts = np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
    index = build_nn_index(pts)
    i, d = index.query_one(np.array([1.0, 0.0, 0.0]))
    assert i == 0  # indices 0 and 1 are both at distance 1; lowest wins
    assert d == 1.0
    i, _ = index.query_one(np.array([3.0, 0.0, 0.0]))
    assert i == 0  # indices 0 and 2 tie


def test_lattice_center_tie(rng):
    xs = np.arange(4, dtype=float)
    grid = np.array([[x, y, z] for x in xs for y in xs for z in xs])
    index = build_nn_index(grid)
    queries = grid[:27] + 0.5  # exact 8-way ties
    got_i, got_d = index.query(queries)
    want_i, want_d = linear_scan_nn(grid, queries)
    assert np.array_equal(got_i, want_i)
    assert np.array_equal(got_d, want_d)


def test_empty_cloud_rejected():
    with pytest.raises(InputError):
        build_nn_index(np.zeros((0, 3)))
