import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dijkstra_costs
from trailnav.astar import COST_FLOOR, GridPath, downsample_path, edge_cost, heuristic_grid, path_cost, plan
from trailnav.costmap import CostGrid
from trailnav.errors import NoPath, OutOfGrid, TooFewPoints


def random_grid(rng, n=50, lethal_frac=0.15, res=0.2):
    cost = rng.uniform(0.0, 0.9, (n, n))
    cost[rng.uniform(size=(n, n)) < lethal_frac] = 1.0
    return CostGrid((0.0, 0.0), res, cost)


def free_cell(rng, grid):
    while True:
        r, c = rng.integers(0, grid.shape[0]), rng.integers(0, grid.shape[1])
        if grid.cost[r, c] < 0.95:
            return int(r), int(c)


def test_uniform_row_closed_form():
    c, res, k = 0.3, 0.25, 12
    grid = CostGrid((0, 0), res, np.full((20, 20), c))
    p = plan(grid, grid.cell_center(5, 3), grid.cell_center(5, 3 + k))
    assert [rc[0] for rc in p.cells] == [5] * (k + 1)
    assert p.cost == pytest.approx((c + COST_FLOOR) * k * res, rel=1e-12)


def test_start_equals_goal():
    grid = CostGrid((0, 0), 0.5, np.full((4, 4), 0.2))
    p = plan(grid, (1.0, 1.0), (1.1, 0.9))
    assert p.cells == [(2, 2)] and p.cost == 0.0
    assert np.allclose(p.points, [[1.0, 1.0]])


def test_matches_dijkstra(rng):
    for _ in range(20):
        grid = random_grid(rng)
        s, g = free_cell(rng, grid), free_cell(rng, grid)
        ref = dijkstra_costs(grid.cost, grid.resolution, s)[g]
        if math.isinf(ref):
            with pytest.raises(NoPath):
                plan(grid, grid.cell_center(*s), grid.cell_center(*g))
            continue
        p = plan(grid, grid.cell_center(*s), grid.cell_center(*g))
        assert p.cost == ref
        assert p.cells[0] == s and p.cells[-1] == g
        assert path_cost(grid, p.cells) == pytest.approx(p.cost, abs=1e-9)


def test_path_is_eight_connected_and_avoids_lethal(rng):
    grid = random_grid(rng, lethal_frac=0.25)
    s, g = free_cell(rng, grid), free_cell(rng, grid)
    try:
        p = plan(grid, grid.cell_center(*s), grid.cell_center(*g))
    except NoPath:
        pytest.skip("sampled pair disconnected")
    for (r0, c0), (r1, c1) in zip(p.cells, p.cells[1:]):
        assert max(abs(r1 - r0), abs(c1 - c0)) == 1
        assert grid.cost[r1, c1] < 0.95


def test_heuristic_admissible(rng):
    for _ in range(10):
        grid = random_grid(rng)
        g = free_cell(rng, grid)
        to_go = dijkstra_costs(grid.cost, grid.resolution, g)
        h = heuristic_grid(grid, g)
        finite = np.isfinite(to_go)
        assert np.all(h[finite] <= to_go[finite] + 1e-12)


def test_zero_grid_gives_octile_length():
    grid = CostGrid((0, 0), 1.0, np.zeros((30, 30)))
    p = plan(grid, (2, 3), (20, 9))
    dx, dy = 18, 6
    octile = (max(dx, dy) - min(dx, dy)) + math.sqrt(2) * min(dx, dy)
    assert p.cost == pytest.approx(COST_FLOOR * octile, rel=1e-12)
    steps = np.diff(p.points, axis=0)
    assert np.sum(np.hypot(*steps.T)) == pytest.approx(octile, rel=1e-12)


def test_no_corner_cutting():
    cost = np.zeros((3, 3))
    cost[0, 1] = 1.0
    cost[1, 0] = 1.0
    grid = CostGrid((0, 0), 1.0, cost)
    with pytest.raises(NoPath):
        plan(grid, (0, 0), (1, 1))
    cost[1, 0] = 0.0
    p = plan(CostGrid((0, 0), 1.0, cost), (0, 0), (1, 1))
    assert p.cells == [(0, 0), (1, 0), (1, 1)]


def test_errors():
    grid = CostGrid((0, 0), 1.0, np.zeros((5, 5)))
    with pytest.raises(OutOfGrid):
        plan(grid, (-3, 0), (2, 2))
    with pytest.raises(OutOfGrid):
        plan(grid, (0, 0), (2, 9))
    wall = np.zeros((5, 5))
    wall[:, 2] = 1.0
    with pytest.raises(NoPath):
        plan(CostGrid((0, 0), 1.0, wall), (0, 0), (4, 4))
    with pytest.raises(NoPath):
        plan(CostGrid((0, 0), 1.0, wall), (0, 0), (2, 2))


def test_lethal_start_cell_may_be_left():
    cost = np.zeros((5, 5))
    cost[0, 0] = 1.0
    p = plan(CostGrid((0, 0), 1.0, cost), (0, 0), (4, 4))
    assert p.cells[0] == (0, 0) and p.cells[-1] == (4, 4)


def test_edge_cost_formula():
    assert edge_cost(0.2, 0.4, 2.0, 0.05) == pytest.approx((0.3 + 0.05) * 2.0)


def test_downsample_examples():
    pts = np.column_stack([np.linspace(0, 3.9, 40), np.zeros(40)])
    out = downsample_path(pts, 30)
    assert len(out) == 30
    assert np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])
    assert np.array_equal(downsample_path(pts, 40), pts)
    line = np.column_stack([np.arange(10.0), np.zeros(10)])
    mid = downsample_path(GridPath([], line, 0.0), 3)
    assert np.array_equal(mid[0], line[0]) and np.array_equal(mid[-1], line[-1])
    assert abs(mid[1, 0] - 4.5) <= 1.0


def test_downsample_errors():
    with pytest.raises(TooFewPoints):
        downsample_path(np.zeros((4, 2)), 1)
    with pytest.raises(TooFewPoints):
        downsample_path(np.zeros((0, 2)), 3)


@given(st.integers(2, 60), st.integers(2, 40), st.integers(0, 10_000))
def test_downsample_spacing_and_endpoints(n_in, n_out, seed):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(rng.uniform(0.1, 1.0, (n_in, 2)), axis=0)
    out = downsample_path(pts, n_out)
    assert np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])
    if n_out != n_in:
        # Interior spacing is uniform in arc length along the polyline, so chords never exceed it.
        seg = np.hypot(*np.diff(pts, axis=0).T).sum() / (n_out - 1)
        assert np.all(np.hypot(*np.diff(out, axis=0).T) <= seg + 1e-9)
