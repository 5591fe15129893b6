import numpy as np
import pytest

import heatmeasure as hm
from heatmeasure.grid import GridError, membership_tol


def test_paper_coarse_grid_nodes(coarse_grid):
    # h = 1/4 with tau = h/2 on (0,1) x (0, 3/2)
    assert np.array_equal(coarse_grid.x, np.array([0.25, 0.5, 0.75]))
    assert coarse_grid.h == 0.25
    assert np.all(coarse_grid.tau == 0.125)
    assert coarse_grid.n_steps == 12


def test_smallest_grid():
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 1.0])
    assert grid.x.tolist() == [0.5]
    assert grid.tau.tolist() == [1.0]


def test_fine_grid_coupling():
    # h = 1/256 with tau = h/2 = 1/512
    grid = hm.build_grid(0.0, 1.0, 1.5, 255, hm.equidistant_time_points(1.5, 768))
    assert grid.h == pytest.approx(1.0 / 256, abs=0.0)
    assert grid.tau[0] == pytest.approx(1.0 / 512, rel=1e-15)
    assert grid.n_steps == 768


def test_time_intervals_cover_and_disjoint(coarse_grid):
    t = coarse_grid.t
    assert t[0] == 0.0 and t[-1] == coarse_grid.T
    assert np.all(np.diff(t) > 0)
    assert np.sum(coarse_grid.tau) == pytest.approx(coarse_grid.T, rel=1e-15)


def test_grid_determinism():
    g1 = hm.build_grid(0.0, 1.0, 1.5, 7, hm.equidistant_time_points(1.5, 24))
    g2 = hm.build_grid(0.0, 1.0, 1.5, 7, hm.equidistant_time_points(1.5, 24))
    assert np.array_equal(g1.x, g2.x) and np.array_equal(g1.t, g2.t)


def test_build_grid_errors():
    with pytest.raises(GridError):
        hm.build_grid(0.0, 1.0, 1.0, 0, [0.0, 1.0])
    with pytest.raises(GridError):
        hm.build_grid(0.0, 1.0, 1.0, 3, [0.0, 0.5, 0.25, 1.0])
    with pytest.raises(GridError):
        hm.build_grid(0.0, 1.0, 1.0, 3, [0.1, 0.5, 1.0])


def test_index_sets_coarse(coarse_grid, region):
    idx = hm.control_index_sets(coarse_grid, region)
    assert idx.space.tolist() == [0, 1, 2]
    # time points t_k in [1/4, 5/4] are k = 2..10
    expected = [(j, k) for j in range(3) for k in range(2, 11)]
    assert sorted(idx.spacetime) == sorted(expected)
    # intervals fully inside [1/4, 5/4] are I_3..I_10 (0-based 2..9)
    assert idx.intervals.tolist() == list(range(2, 10))


def test_index_sets_exhaustive(coarse_grid, region):
    idx = hm.control_index_sets(coarse_grid, region)
    members = set(idx.spacetime)
    for j in range(coarse_grid.n_nodes):
        for k in range(coarse_grid.n_steps + 1):
            inside = (
                region.x_lo <= coarse_grid.x[j] <= region.x_hi
                and region.t_lo <= coarse_grid.t[k] <= region.t_hi
            )
            assert ((j, k) in members) == inside


def test_single_candidate_node():
    grid = hm.build_grid(0.0, 1.0, 1.0, 1, [0.0, 0.25, 0.5, 0.75, 1.0])
    region = hm.ControlRegion(0.2, 0.8, 0.2, 0.8)
    idx = hm.control_index_sets(grid, region)
    assert idx.space.tolist() == [0]


def test_too_coarse_raises():
    grid = hm.build_grid(0.0, 1.0, 1.0, 3, [0.0, 0.5, 1.0])
    region = hm.ControlRegion(0.26, 0.27, 0.1, 0.2)
    with pytest.raises(GridError, match="too coarse"):
        hm.control_index_sets(grid, region)


def test_no_interval_fits():
    # I_c = (1.3, 1.4) shorter than any step: interval set empty, points may hit
    grid = hm.build_grid(0.0, 1.0, 1.5, 3, hm.equidistant_time_points(1.5, 12))
    region = hm.ControlRegion(0.25, 0.75, 1.3, 1.4)
    idx = hm.control_index_sets(grid, region)
    assert idx.intervals.size == 0


def test_membership_tolerance_regimes():
    dyadic = hm.build_grid(0.0, 1.0, 1.0, 3, [0.0, 0.5, 1.0])
    assert membership_tol(dyadic) == (0.0, 0.0)
    # thirds are not exactly representable: nonzero spatial tolerance
    thirds = hm.build_grid(0.0, 1.0, 1.0, 2, [0.0, 0.5, 1.0])
    tol_x, _ = membership_tol(thirds)
    assert tol_x > 0.0


def test_region_validation(coarse_grid):
    with pytest.raises(GridError):
        hm.ControlRegion(0.0, 0.75, 0.25, 1.25).validate(coarse_grid)
    with pytest.raises(GridError):
        hm.ControlRegion(0.25, 0.75, 0.25, 1.5).validate(coarse_grid)
