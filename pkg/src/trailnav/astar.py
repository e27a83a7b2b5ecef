"""A* search over a :class:`~trailnav.costmap.CostGrid`.

Edges join 8-neighbouring cells. An edge costs the mean of its two cell
costs plus ``cost_floor``, times the distance between cell centres. The
heuristic is the straight-line distance to the goal times the smallest
per-metre cost any edge can have, so it never overestimates.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.typing import ArrayLike, NDArray

from .costmap import CostGrid
from .errors import NoPath, OutOfGrid, TooFewPoints

COST_FLOOR = 0.05
LETHAL_THRESHOLD = 0.95


@dataclass
class GridPath:
    cells: list[tuple[int, int]]
    points: NDArray[np.float64]
    cost: float
    expanded: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)


def edge_cost(c_u: float, c_v: float, length: float, cost_floor: float = COST_FLOOR) -> float:
    # Same association as the search so sums agree to the last bit.
    return (0.5 * (c_u + cost_floor) + 0.5 * (c_v + cost_floor)) * length


def heuristic_grid(grid: CostGrid, goal_cell: tuple[int, int], cost_floor: float = COST_FLOOR) -> NDArray[np.float64]:
    """Heuristic value of every cell, as used by :func:`plan`."""
    rows, cols = grid.shape
    rr, cc = np.mgrid[0:rows, 0:cols]
    scale = (float(grid.cost.min()) + cost_floor) * grid.resolution
    return np.hypot(rr - goal_cell[0], cc - goal_cell[1]) * scale


def locate(grid: CostGrid, p: ArrayLike) -> tuple[int, int]:
    r, c = grid.to_index(p)
    if not grid.in_grid(r, c)[0]:
        raise OutOfGrid(f"point {tuple(np.asarray(p, float))} lies outside {grid}")
    return int(r[0]), int(c[0])



@njit(cache=True)
def _search(blocked, half, h, W, s_idx, g_idx, res):
    """Best-first search on the padded, flattened grid.

    ``parent`` is -1 at the start, -2 for cells never reached. Heap entries are
    ``(f, -g, index)`` so f-ties pop the deeper node first.
    """
    n = blocked.shape[0]
    g = np.full(n, np.inf)
    parent = np.full(n, -2, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    g[s_idx] = 0.0
    parent[s_idx] = -1
    straight = np.array([1, -1, W, -W], dtype=np.int64)
    diag = np.array([W + 1, W - 1, -W + 1, -W - 1], dtype=np.int64)
    diag_r = np.array([W, W, -W, -W], dtype=np.int64)
    diag_c = np.array([1, -1, 1, -1], dtype=np.int64)
    dlen = math.sqrt(2.0) * res
    heap = [(h[s_idx], -0.0, s_idx)]
    expanded = 0
    while len(heap) > 0:
        item = heapq.heappop(heap)
        u = item[2]
        if closed[u]:
            continue
        closed[u] = True
        expanded += 1
        if u == g_idx:
            break
        g_u = -item[1]
        hu = half[u]
        for k in range(4):
            v = u + straight[k]
            if blocked[v] or closed[v]:
                continue
            g_v = g_u + (hu + half[v]) * res
            if g_v < g[v]:
                g[v] = g_v
                parent[v] = u
                heapq.heappush(heap, (g_v + h[v], -g_v, v))
        for k in range(4):
            v = u + diag[k]
            if blocked[v] or closed[v] or blocked[u + diag_r[k]] or blocked[u + diag_c[k]]:
                continue
            g_v = g_u + (hu + half[v]) * dlen
            if g_v < g[v]:
                g[v] = g_v
                parent[v] = u
                heapq.heappush(heap, (g_v + h[v], -g_v, v))
    if not closed[g_idx]:
        parent[g_idx] = -2
    return g, parent, expanded

def plan(grid: CostGrid, start: ArrayLike, goal: ArrayLike, cost_floor: float = COST_FLOOR,
         lethal_threshold: float = LETHAL_THRESHOLD) -> GridPath:
    """Minimum-cost 8-connected path between the cells containing ``start`` and ``goal``.

    Cells with cost at or above ``lethal_threshold`` are removed from the
    graph, except the start cell so a vehicle inside an inflated margin can
    still leave it. Diagonal moves may not cut past a lethal orthogonal
    neighbour. Ties on f-score go to the deeper node.

    Raises:
        OutOfGrid: start or goal is outside the raster.
        NoPath: the goal cell is lethal or unreachable.
    """
    rows, cols = grid.shape
    s_r, s_c = locate(grid, start)
    g_r, g_c = locate(grid, goal)
    if grid.cost[g_r, g_c] >= lethal_threshold and (g_r, g_c) != (s_r, s_c):
        raise NoPath("goal cell is lethal")

    # Work on a copy padded with one lethal ring so neighbours need no bounds check.
    res = grid.resolution
    W = cols + 2
    pad_blocked = np.ones((rows + 2, W), dtype=bool)
    pad_blocked[1:-1, 1:-1] = grid.cost >= lethal_threshold
    pad_blocked[s_r + 1, s_c + 1] = False
    half = np.zeros((rows + 2, W))
    half[1:-1, 1:-1] = 0.5 * (grid.cost + cost_floor)
    h_scale = (float(grid.cost.min()) + cost_floor) * res
    rr, cc = np.mgrid[-1:rows + 1, -1:cols + 1]
    h = np.hypot(rr - g_r, cc - g_c) * h_scale

    s_idx = (s_r + 1) * W + s_c + 1
    g_idx = (g_r + 1) * W + g_c + 1
    g, parent, expanded = _search(pad_blocked.ravel(), half.ravel(), h.ravel(), W, s_idx, g_idx, res)
    if parent[g_idx] == -2:
        raise NoPath(f"goal cell {(g_r, g_c)} unreachable from {(s_r, s_c)}")

    cells = []
    u = g_idx
    while u >= 0:
        r, c = divmod(int(u), W)
        cells.append((r - 1, c - 1))
        u = parent[u]
    cells.reverse()
    idx = np.array(cells, dtype=float)
    points = grid.origin + idx[:, ::-1] * res
    return GridPath(cells=[(int(r), int(c)) for r, c in cells], points=points, cost=float(g[g_idx]), expanded=int(expanded))


def path_cost(grid: CostGrid, cells: list[tuple[int, int]], cost_floor: float = COST_FLOOR) -> float:
    """Recompute the edge-cost sum along a cell sequence."""
    total = 0.0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        steps = abs(r1 - r0) + abs(c1 - c0)
        length = grid.resolution * (math.sqrt(2.0) if steps == 2 else 1.0)
        total += edge_cost(grid.cost[r0, c0], grid.cost[r1, c1], length, cost_floor)
    return total


def downsample_path(path: GridPath | ArrayLike, n_points: int) -> NDArray[np.float64]:
    """Resample a grid path to ``n_points`` at uniform arc-length spacing.

    Endpoints are kept exactly. Asking for as many points as the path has
    returns it unchanged.
    """
    pts = np.asarray(path.points if isinstance(path, GridPath) else path, dtype=float).reshape(-1, 2)
    if n_points < 2:
        raise TooFewPoints(f"need at least 2 points, got {n_points}")
    if len(pts) == 0:
        raise TooFewPoints("empty path")
    if n_points == len(pts):
        return pts.copy()
    seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(pts[:1], n_points, axis=0)
    targets = np.linspace(0.0, s[-1], n_points)
    out = np.stack([np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])], axis=1)
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out
