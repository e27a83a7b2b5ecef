"""Fixed-resolution cost rasters for the A* planner and the MPPI baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from .errors import RegionOutOfBounds, ShapeMismatch
from .field import Bounds, TerrainField, parse_raster, raster_dict


@dataclass(frozen=True)
class GeomCostParams:
    max_slope: float = 0.3
    max_step: float = 0.2
    coarse_resolution: float = 0.25

    def __post_init__(self) -> None:
        if min(self.max_slope, self.max_step, self.coarse_resolution) <= 0:
            raise ValueError("geometric cost parameters must be strictly positive")


class CostGrid:
    """Cost raster with values in [0, 1].

    ``origin`` is the centre of cell ``(0, 0)``; cell ``(r, c)`` is centred at
    ``origin + (c, r) * resolution``. The same convention is used by the
    raster JSON, so grids round-trip through :class:`~trailnav.field.GriddedField`.
    """

    def __init__(self, origin: ArrayLike, resolution: float, cost: ArrayLike):
        cost = np.array(cost, dtype=float)
        if cost.ndim != 2:
            raise ValueError("cost must be a 2-D array")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        if cost.size and (np.nanmin(cost) < 0 or np.nanmax(cost) > 1 or np.isnan(cost).any()):
            raise ValueError("cost values must lie in [0, 1]")
        cost.setflags(write=False)
        self.cost = cost
        self.origin = np.asarray(origin, dtype=float).reshape(2).copy()
        self.origin.setflags(write=False)
        self.resolution = float(resolution)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape

    def same_layout(self, other: CostGrid) -> bool:
        return (
            self.shape == other.shape
            and self.resolution == other.resolution
            and np.array_equal(self.origin, other.origin)
        )

    def cell_center(self, row: int, col: int) -> NDArray[np.float64]:
        return self.origin + np.array([col, row], dtype=float) * self.resolution

    def centers(self) -> NDArray[np.float64]:
        """Cell centres as a ``(rows, cols, 2)`` array."""
        rows, cols = self.shape
        xs = self.origin[0] + np.arange(cols) * self.resolution
        ys = self.origin[1] + np.arange(rows) * self.resolution
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], axis=-1)

    def to_index(self, pts: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
        """Nearest cell ``(rows, cols)`` for points; may fall outside the grid."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        f = (pts - self.origin) / self.resolution
        return np.floor(f[:, 1] + 0.5).astype(np.int64), np.floor(f[:, 0] + 0.5).astype(np.int64)

    def in_grid(self, rows: ArrayLike, cols: ArrayLike) -> NDArray[np.bool_]:
        r = np.asarray(rows)
        c = np.asarray(cols)
        return (r >= 0) & (r < self.shape[0]) & (c >= 0) & (c < self.shape[1])

    def sample_nearest(self, pts: ArrayLike, outside: float = np.nan) -> NDArray[np.float64]:
        pts = np.asarray(pts, dtype=float)
        lead = pts.shape[:-1]
        r, c = self.to_index(pts)
        ok = self.in_grid(r, c)
        out = np.full(r.shape, float(outside))
        out[ok] = self.cost[r[ok], c[ok]]
        return out.reshape(lead)

    def extent(self) -> Bounds:
        """Outer edges of the raster (cell centres +/- half a cell)."""
        rows, cols = self.shape
        h = 0.5 * self.resolution
        return Bounds(self.origin[0] - h, self.origin[0] + (cols - 1) * self.resolution + h,
                      self.origin[1] - h, self.origin[1] + (rows - 1) * self.resolution + h)

    def to_raster(self) -> dict:
        return raster_dict(self.origin, self.resolution, self.cost)

    @classmethod
    def from_raster(cls, raster: dict) -> CostGrid:
        origin, res, values = parse_raster(raster)
        return cls(origin, res, values)

    def __repr__(self) -> str:
        return f"CostGrid(shape={self.shape}, origin={tuple(self.origin)}, resolution={self.resolution})"


def region_layout(region: Bounds, resolution: float) -> tuple[NDArray[np.float64], int, int]:
    """Tile ``region`` with whole cells; returns ``(origin, rows, cols)``."""
    region = Bounds.of(region)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    cols = int(math.floor((region.x_max - region.x_min) / resolution + 1e-9))
    rows = int(math.floor((region.y_max - region.y_min) / resolution + 1e-9))
    if rows <= 0 or cols <= 0:
        raise RegionOutOfBounds(f"region {region} holds no {resolution} m cells")
    origin = np.array([region.x_min + 0.5 * resolution, region.y_min + 0.5 * resolution])
    return origin, rows, cols


def _check_region(field: TerrainField, region: Bounds) -> None:
    fb = field.bounds
    if fb is None:
        return
    eps = 1e-9
    if (region.x_min < fb.x_min - eps or region.x_max > fb.x_max + eps
            or region.y_min < fb.y_min - eps or region.y_max > fb.y_max + eps):
        raise RegionOutOfBounds(f"region {region} exceeds field bounds {fb}")


def _sample_region(field: TerrainField, region, resolution):
    region = Bounds.of(region)
    origin, rows, cols = region_layout(region, resolution)
    _check_region(field, region)
    xs = origin[0] + np.arange(cols) * resolution
    ys = origin[1] + np.arange(rows) * resolution
    X, Y = np.meshgrid(xs, ys)
    v, g = field.query_many(np.stack([X.ravel(), Y.ravel()], axis=1))
    return origin, v.reshape(rows, cols), g.reshape(rows, cols, 2)


def max_neighbor_step(elev: NDArray[np.float64]) -> NDArray[np.float64]:
    """Largest absolute elevation difference to any 8-neighbour present in the grid."""
    padded = np.pad(elev, 1, mode="edge")
    rows, cols = elev.shape
    step = np.zeros_like(elev)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            nb = padded[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]
            np.maximum(step, np.abs(nb - elev), out=step)
    return step


def build_geometric_costmap(elev: TerrainField, region, params: GeomCostParams) -> CostGrid:
    """Slope x step cost.

    Slope comes from the field's analytic gradient at cell centres; step is
    the largest elevation jump to an 8-neighbour. Each is normalised by its
    acceptable maximum and clipped to [0, 1] before taking the product.
    """
    origin, elev_vals, grads = _sample_region(elev, region, params.coarse_resolution)
    slope = np.clip(np.hypot(grads[..., 0], grads[..., 1]) / params.max_slope, 0.0, 1.0)
    step = np.clip(max_neighbor_step(elev_vals) / params.max_step, 0.0, 1.0)
    return CostGrid(origin, params.coarse_resolution, slope * step)


def rasterize_bumpiness(bump: TerrainField, region, resolution: float) -> CostGrid:
    origin, vals, _ = _sample_region(bump, region, resolution)
    return CostGrid(origin, resolution, np.clip(vals, 0.0, 1.0))


def blend_costmaps(a: CostGrid, b: CostGrid, weight: float) -> CostGrid:
    if not 0.0 <= weight <= 1.0:
        raise ValueError("blend weight must lie in [0, 1]")
    if not a.same_layout(b):
        raise ShapeMismatch(f"cannot blend {a} with {b}")
    if weight == 1.0:
        return CostGrid(a.origin, a.resolution, a.cost)
    return CostGrid(a.origin, a.resolution, weight * a.cost + (1.0 - weight) * b.cost)


def inflate(grid: CostGrid, radius: float) -> CostGrid:
    """Grayscale dilation with a disk of ``radius`` metres."""
    if radius <= 0:
        return grid
    r = int(math.floor(radius / grid.resolution + 1e-9))
    if r == 0:
        return grid
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    disk = (xx**2 + yy**2) <= (radius / grid.resolution) ** 2 + 1e-9
    dilated = ndimage.grey_dilation(grid.cost, footprint=disk, mode="nearest")
    return CostGrid(grid.origin, grid.resolution, dilated)
