import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trailnav.costmap import (
    CostGrid,
    GeomCostParams,
    blend_costmaps,
    build_geometric_costmap,
    inflate,
    max_neighbor_step,
    rasterize_bumpiness,
    region_layout,
)
from trailnav.errors import RegionOutOfBounds, ShapeMismatch
from trailnav.field import Bounds, ConstantField, GaussianBumpField, GriddedField, PlaneField

REGION = Bounds(-3.125, 3.125, -3.125, 3.125)


def test_flat_field_costs_nothing():
    g = build_geometric_costmap(ConstantField(1.7), REGION, GeomCostParams())
    assert g.shape == (25, 25)
    assert np.all(g.cost == 0.0)


def test_saturating_plane_costs_one():
    p = GeomCostParams(max_slope=0.3, max_step=0.05, coarse_resolution=0.25)
    g = build_geometric_costmap(PlaneField(0.3, 0.0), REGION, p)
    assert np.all(g.cost[1:-1, 1:-1] == 1.0)


def test_gaussian_bump_ring():
    p = GeomCostParams(max_slope=0.3, max_step=0.2, coarse_resolution=0.25)
    g = build_geometric_costmap(GaussianBumpField([(0, 0)], [1.0], [1.0]), REGION, p)
    r, c = g.to_index([(0.0, 0.0)])
    assert np.allclose(g.cell_center(r[0], c[0]), (0.0, 0.0))
    assert g.cost[r[0], c[0]] == 0.0
    field = GaussianBumpField([(0, 0)], [1.0], [1.0])
    xs = np.array([g.cell_center(r[0], c[0] + k) for k in range(13)])
    _, grads = field.query_many(xs)
    slope = np.hypot(*grads.T)
    # |grad| = r exp(-r^2/2) has its analytic argmax at r = sigma.
    assert xs[np.argmax(slope), 0] == pytest.approx(1.0)
    # The 8-neighbour step term pulls the fused peak inward by at most one cell.
    row = g.cost[r[0], c[0]:c[0] + 13]
    assert abs(xs[np.argmax(row), 0] - 1.0) <= g.resolution + 1e-12
    assert np.all(np.diff(row[: np.argmax(row) + 1]) >= 0)
    assert np.all(np.diff(row[np.argmax(row):]) <= 0)


def test_step_uses_eight_neighbours_with_edge_padding():
    elev = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    step = max_neighbor_step(elev)
    assert step[1, 1] == 1.0          # diagonal neighbour counts
    assert step[0, 0] == 0.0          # the far corner is not adjacent
    assert step[2, 2] == 1.0


def test_blend_examples(rng):
    a = CostGrid((0, 0), 0.5, rng.uniform(size=(4, 6)))
    b = CostGrid((0, 0), 0.5, rng.uniform(size=(4, 6)))
    assert np.array_equal(blend_costmaps(a, b, 1.0).cost, a.cost)
    zeros = CostGrid((0, 0), 0.5, np.zeros((4, 6)))
    ones = CostGrid((0, 0), 0.5, np.ones((4, 6)))
    assert np.all(blend_costmaps(zeros, ones, 0.5).cost == 0.5)
    m = blend_costmaps(a, b, 0.5).cost
    for i in range(4):
        for j in range(6):
            assert m[i, j] == pytest.approx(0.5 * a.cost[i, j] + 0.5 * b.cost[i, j], abs=1e-15)


def test_blend_shape_mismatch():
    a = CostGrid((0, 0), 0.5, np.zeros((4, 6)))
    with pytest.raises(ShapeMismatch):
        blend_costmaps(a, CostGrid((0, 0), 0.5, np.zeros((4, 5))), 0.5)
    with pytest.raises(ShapeMismatch):
        blend_costmaps(a, CostGrid((0.1, 0), 0.5, np.zeros((4, 6))), 0.5)


def test_rasterize_constant_and_argmax():
    g = rasterize_bumpiness(ConstantField(0.3), REGION, 0.25)
    assert np.allclose(g.cost, 0.3)
    bump = GaussianBumpField([(0.75, -1.25)], [0.9], [0.6])
    g = rasterize_bumpiness(bump, REGION, 0.25)
    r, c = np.unravel_index(np.argmax(g.cost), g.shape)
    assert np.allclose(g.cell_center(r, c), (0.75, -1.25))


def test_empty_region_rejected():
    with pytest.raises(RegionOutOfBounds):
        rasterize_bumpiness(ConstantField(0.3), Bounds(0, 0, 0, 1), 0.25)
    with pytest.raises(RegionOutOfBounds):
        region_layout(Bounds(0, 0.1, 0, 1), 0.25)


def test_region_outside_field_bounds_rejected():
    f = ConstantField(0.3, bounds=(0, 1, 0, 1))
    with pytest.raises(RegionOutOfBounds):
        rasterize_bumpiness(f, Bounds(0, 2, 0, 1), 0.25)


def test_cost_grid_rejects_values_outside_unit_interval():
    with pytest.raises(ValueError):
        CostGrid((0, 0), 1.0, [[0.0, 1.5]])
    with pytest.raises(ValueError):
        CostGrid((0, 0), 0.0, [[0.0]])


def test_cost_grid_is_read_only():
    g = CostGrid((0, 0), 1.0, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        g.cost[0, 0] = 1.0


def test_raster_round_trip_with_gridded_field():
    g = rasterize_bumpiness(GaussianBumpField([(0, 0)], [0.8], [1.0]), REGION, 0.25)
    back = CostGrid.from_raster(g.to_raster())
    assert back.same_layout(g) and np.array_equal(back.cost, g.cost)
    f = GriddedField.from_raster(g.to_raster(), interpolation="bilinear")
    assert f.query(g.cell_center(3, 4)).value == pytest.approx(g.cost[3, 4], abs=1e-12)


def test_inflate_disk():
    cost = np.zeros((11, 11))
    cost[5, 5] = 1.0
    g = inflate(CostGrid((0, 0), 0.1, cost), 0.2)
    rr, cc = np.mgrid[0:11, 0:11]
    inside = np.hypot(rr - 5, cc - 5) <= 2.0 + 1e-9
    assert np.all(g.cost[inside] == 1.0)
    assert np.all(g.cost[~inside] == 0.0)
    assert inflate(g, 0.0) is g


elev_params = st.tuples(st.floats(-2, 2), st.floats(0.2, 2.0), st.floats(-2, 2), st.floats(-2, 2))


@given(elev_params)
def test_costs_in_unit_interval(prm):
    a, w, cx, cy = prm
    g = build_geometric_costmap(GaussianBumpField([(cx, cy)], [a], [w]), REGION, GeomCostParams())
    assert g.cost.min() >= 0.0 and g.cost.max() <= 1.0


@given(elev_params)
def test_product_fusion(prm):
    a, w, cx, cy = prm
    field = GaussianBumpField([(cx, cy)], [a], [w])
    p = GeomCostParams()
    g = build_geometric_costmap(field, REGION, p)
    centers = g.centers().reshape(-1, 2)
    _, grads = field.query_many(centers)
    slope = np.clip(np.hypot(*grads.T) / p.max_slope, 0, 1).reshape(g.shape)
    step = np.clip(max_neighbor_step(field.values(centers).reshape(g.shape)) / p.max_step, 0, 1)
    assert np.all(g.cost[(slope == 0) | (step == 0)] == 0.0)
    assert np.all((g.cost < 1.0) | ((slope == 1.0) & (step == 1.0)))


@given(elev_params)
def test_amplitude_monotonicity(prm):
    a, w, cx, cy = prm
    p = GeomCostParams()
    region = Bounds.of(REGION)
    origin, rows, cols = region_layout(region, p.coarse_resolution)
    pts = CostGrid(origin, p.coarse_resolution, np.zeros((rows, cols))).centers().reshape(-1, 2)
    g1 = np.hypot(*GaussianBumpField([(cx, cy)], [a], [w]).query_many(pts)[1].T)
    g2 = np.hypot(*GaussianBumpField([(cx, cy)], [2 * a], [w]).query_many(pts)[1].T)
    assert np.all(g2 >= g1)
