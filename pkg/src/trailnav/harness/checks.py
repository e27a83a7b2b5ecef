"""Gradient check and per-stage timing used by the ``gradcheck`` and ``bench`` commands."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from ..astar import plan
from ..costmap import CostGrid
from ..field import GaussianBumpField, SquashedField
from ..timescale import VehicleLimits
from ..track import MpcWeights, UnicycleState, mpc_solve
from ..trajopt import FootprintSpec, ObjectiveWeights, SpeedParams, objective


def random_bump_field(rng: np.random.Generator, n_bumps: int = 8, size: float = 12.0) -> SquashedField:
    centers = rng.uniform(0.0, size, (n_bumps, 2))
    amps = rng.uniform(-2.0, 3.0, n_bumps)
    widths = rng.uniform(0.6, 2.0, n_bumps)
    return SquashedField(GaussianBumpField(centers, amps, widths), 1.0, -1.0)


def random_smooth_path(rng: np.random.Generator, m: int = 12, size: float = 12.0) -> np.ndarray:
    """Wavy left-to-right control polygon with well separated points."""
    xs = np.linspace(1.0, size - 1.0, m) + rng.uniform(-0.15, 0.15, m)
    xs.sort()
    ys = size / 2 + 1.5 * np.sin(rng.uniform(0.3, 1.0) * xs + rng.uniform(0, 2 * np.pi)) + rng.uniform(-0.3, 0.3, m)
    return np.column_stack([xs, ys])


@dataclass
class GradCheckResult:
    errors: list[float]
    max_error: float
    seconds: float


def gradient_check(n_configs: int = 10, seed: int = 0, step: float = 1e-5, n_dense: int = 64) -> GradCheckResult:
    """Max relative error between the analytic gradient and central differences.

    The error of one configuration is ``|g - g_fd|_inf / max(|g_fd|_inf, 1e-8)``.
    """
    rng = np.random.default_rng(seed)
    weights = ObjectiveWeights()
    params = SpeedParams()
    fp = FootprintSpec()
    errs = []
    t0 = time.perf_counter()
    for _ in range(n_configs):
        bump = random_bump_field(rng)
        ctrl = random_smooth_path(rng, int(rng.integers(6, 14)))
        g = objective(ctrl, bump, weights, params, fp, n_dense).grad
        fd = np.zeros_like(g)
        for i in range(1, len(ctrl) - 1):
            for d in range(2):
                plus = ctrl.copy()
                minus = ctrl.copy()
                plus[i, d] += step
                minus[i, d] -= step
                jp = objective(plus, bump, weights, params, fp, n_dense, want_grad=False).J
                jm = objective(minus, bump, weights, params, fp, n_dense, want_grad=False).J
                fd[i - 1, d] = (jp - jm) / (2 * step)
        errs.append(float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-8)))
    return GradCheckResult(errs, max(errs) if errs else 0.0, time.perf_counter() - t0)


def bench_grid(rng: np.random.Generator, n: int = 100, resolution: float = 0.25) -> CostGrid:
    """Smooth random terrain cost with lethal blobs, clear at the two corners."""
    noise = gaussian_filter(rng.standard_normal((n, n)), 4.0)
    noise = (noise - noise.min()) / (np.ptp(noise) + 1e-12)
    cost = np.clip(noise**2, 0.0, 1.0)
    cost[noise > 0.8] = 1.0
    cost[:5, :5] = 0.0
    cost[-5:, -5:] = 0.0
    return CostGrid((0.0, 0.0), resolution, cost)


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(repeats: int = 5, seed: int = 0) -> dict[str, float]:
    """Best-of-``repeats`` wall time in milliseconds for the three per-cycle stages."""
    rng = np.random.default_rng(seed)
    bump = random_bump_field(rng)
    ctrl = random_smooth_path(rng, 30)
    w, p, fp = ObjectiveWeights(), SpeedParams(), FootprintSpec(side=0.6, samples_per_side=3)
    objective(ctrl, bump, w, p, fp, 64)
    t_obj = _best_of(lambda: objective(ctrl, bump, w, p, fp, 64), repeats)

    grid = bench_grid(rng)
    goal = grid.cell_center(grid.shape[0] - 1, grid.shape[1] - 1)
    t_astar = _best_of(lambda: plan(grid, (0.0, 0.0), goal), repeats)

    mw = MpcWeights()
    lim = VehicleLimits()
    ts = np.arange(mw.horizon + 1) * mw.dt
    x_ref = np.column_stack([ts, 0.3 * np.sin(ts), 0.3 * np.cos(ts)])
    u_ref = np.column_stack([np.full(mw.horizon, 1.0), np.full(mw.horizon, -0.3)])

    s0 = UnicycleState(0.0, 0.4, 0.2)
    t_mpc = _best_of(lambda: mpc_solve(s0, x_ref, u_ref, mw, lim), repeats)
    return {"objective_ms": 1e3 * t_obj, "astar_ms": 1e3 * t_astar, "mpc_ms": 1e3 * t_mpc}


BENCH_LIMITS_MS = {"objective_ms": 20.0, "astar_ms": 20.0, "mpc_ms": 50.0}
