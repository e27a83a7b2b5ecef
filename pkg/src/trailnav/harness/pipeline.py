"""Closed-loop trials: the trail pipeline (A* -> optimise -> time-scale -> MPC) and MPPI baselines."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import NDArray

from ..astar import GridPath, downsample_path, plan
from ..costmap import CostGrid, blend_costmaps, build_geometric_costmap, inflate, rasterize_bumpiness
from ..errors import ConfigInvalid, InfeasibleBoundary, NoPath
from ..field import TerrainField
from ..mppi import MppiController, MppiVariant
from ..spline import DensePath, interpolate
from ..timescale import Trajectory, time_scale
from ..track import MpcTracker, RolloutLog, UnicycleState, clamp_input, step_dynamics, wrap_angle
from ..trajopt import OptimizeResult, footprint_bumpiness_many, optimize, path_yaw
from .scenario import ScenarioConfig, build_bumpiness, build_elevation

log = logging.getLogger(__name__)

METHODS = ("trail", "mppi-geo", "mppi-geo-term", "mppi-bump", "mppi-astar-bump", "mppi-fused")
AZ_WINDOW = 0.1


@dataclass
class Environment:
    scenario: ScenarioConfig
    elevation: TerrainField
    bump: TerrainField
    geo: CostGrid
    bump_grid: CostGrid
    fused: CostGrid

    @classmethod
    def build(cls, sc: ScenarioConfig) -> Environment:
        elev = build_elevation(sc)
        bump = build_bumpiness(sc)
        t = sc.trail
        geo = inflate(build_geometric_costmap(elev, sc.region, t.geom), t.inflation_radius)
        bgrid = rasterize_bumpiness(bump, sc.region, t.geom.coarse_resolution)
        return cls(sc, elev, bump, geo, bgrid, blend_costmaps(geo, bgrid, 0.5))

    def grid_for(self, variant: MppiVariant) -> CostGrid:
        if variant in (MppiVariant.GEO, MppiVariant.GEO_TERM):
            return self.geo
        if variant is MppiVariant.FUSED:
            return self.fused
        return self.bump_grid


@dataclass
class TrailPlan:
    grid_path: GridPath
    initial: NDArray[np.float64]
    opt: OptimizeResult
    dense: DensePath
    traj: Trajectory


def plan_trail(env: Environment, position, v_start: float = 0.0) -> TrailPlan:
    """Plan from ``position`` to the goal: A* on the geometric grid, then refine and time-scale."""
    sc = env.scenario
    t = sc.trail
    goal = np.asarray(sc.goal, dtype=float)
    gp = plan(env.geo, position, goal, t.cost_floor, t.lethal_threshold)
    pts = gp.points.copy()
    pts[0] = position
    pts[-1] = goal
    n = min(t.n_init, len(pts)) if len(pts) >= 2 else 2
    if len(pts) < 2:
        pts = np.vstack([np.asarray(position, dtype=float), goal])
    initial = downsample_path(pts, max(n, 2))
    if len(initial) >= 3:
        initial[1:-1] = sc.region.clamp(initial[1:-1])
    opt = optimize(initial, env.bump, t.weights, t.speed, t.footprint, sc.optimizer_config())
    n_dense = max(t.n_dense, len(opt.ctrl) + 1)
    dense = interpolate(opt.ctrl, n_dense)
    b, _, _ = footprint_bumpiness_many(env.bump, dense.points, path_yaw(dense.points), t.footprint)
    traj = time_scale(dense, b, sc.limits, t.speed, (min(v_start, sc.limits.v_max), 0.0), clamp_boundary=True)
    return TrailPlan(gp, initial, opt, dense, traj)


@dataclass
class RunMetrics:
    scenario: str
    method: str
    trial: int
    seed: int
    success: bool
    progress: float
    time: float | None
    length: float | None
    az_rms_mean: float | None
    az_max: float | None
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialResult:
    metrics: RunMetrics
    log: RolloutLog
    plans: list[TrailPlan] = field(default_factory=list)
    env: Environment | None = None


def windowed_rms(signal, dt: float, window: float = AZ_WINDOW) -> NDArray[np.float64]:
    """RMS over every full sliding window of ``window`` seconds."""
    x = np.asarray(signal, dtype=float)
    w = max(1, int(round(window / dt)))
    if len(x) == 0:
        return np.zeros(0)
    if len(x) < w:
        return np.array([math.sqrt(float(np.mean(x**2)))])
    c = np.concatenate([[0.0], np.cumsum(x**2)])
    return np.sqrt(np.maximum((c[w:] - c[:-w]) / w, 0.0))


def compute_metrics(sc: ScenarioConfig, method: str, trial: int, seed: int, log: RolloutLog,
                    success: bool, reason: str | None) -> RunMetrics:
    start = np.array(sc.start[:2])
    goal = np.array(sc.goal)
    d0 = float(np.linalg.norm(goal - start))
    if log.final is not None:
        final = np.array([log.final.x, log.final.y])
    else:
        final = start
    if success:
        progress = 1.0
    elif d0 > 0:
        progress = float(np.clip(1.0 - np.linalg.norm(goal - final) / d0, 0.0, 1.0))
    else:
        progress = 1.0
    if not success:
        return RunMetrics(sc.name, method, trial, seed, False, progress, None, None, None, None, reason)
    xs = np.append(log.array("x"), final[0])
    ys = np.append(log.array("y"), final[1])
    length = float(np.sum(np.hypot(np.diff(xs), np.diff(ys))))
    elapsed = round(len(log) * sc.sim.dt, 9)
    rms = windowed_rms(log.array("az_proxy"), sc.sim.dt)
    az_mean = float(rms.mean()) if len(rms) else 0.0
    az_max = float(rms.max()) if len(rms) else 0.0
    return RunMetrics(sc.name, method, trial, seed, True, progress, elapsed, length, az_mean, az_max, None)


def _run_loop(env: Environment, controller_for, replan=None) -> tuple[RolloutLog, bool, str | None]:
    sc = env.scenario
    dt = sc.sim.dt
    goal = np.array(sc.goal)
    s = UnicycleState(*sc.start)
    logbook = RolloutLog()
    steps = int(round(sc.sim.time_cap / dt))
    u_prev = 0.0
    for k in range(steps + 1):
        t = k * dt
        if math.hypot(s.x - goal[0], s.y - goal[1]) <= sc.sim.goal_radius:
            logbook.final = s
            return logbook, True, None
        if k == steps:
            break
        if replan is not None:
            replan(s, t, u_prev)
        cmd = controller_for()(s, t)
        u = clamp_input(cmd, sc.limits)
        b = float(env.bump.values([[s.x, s.y]])[0])
        logbook.append(t=t, x=s.x, y=s.y, theta=wrap_angle(s.theta), v=u.v, omega=u.omega,
                       v_cmd=cmd.v, omega_cmd=cmd.omega, bump=b, az_proxy=b * abs(u.v))
        s = step_dynamics(s, u, dt)
        u_prev = u.v
    logbook.final = s
    return logbook, False, "time_cap"


def run_trail(env: Environment, trial: int = 0, seed: int = 0) -> TrialResult:
    sc = env.scenario
    start = np.array(sc.start[:2])
    goal = np.array(sc.goal)
    plans: list[TrailPlan] = []
    if np.linalg.norm(goal - start) <= sc.sim.goal_radius:
        logbook = RolloutLog()
        logbook.final = UnicycleState(*sc.start)
        return TrialResult(compute_metrics(sc, "trail", trial, seed, logbook, True, None), logbook, plans, env)
    try:
        first = plan_trail(env, start, 0.0)
    except NoPath as exc:
        logbook = RolloutLog()
        logbook.final = UnicycleState(*sc.start)
        log.info("no path at start: %s", exc)
        return TrialResult(compute_metrics(sc, "trail", trial, seed, logbook, False, "no_path"), logbook, plans, env)
    plans.append(first)
    state = {"tracker": MpcTracker(first.traj, sc.trail.mpc, sc.limits, 0.0), "next": sc.trail.replan_period}

    def replan(s: UnicycleState, t: float, v_now: float) -> None:
        if t + 1e-9 < state["next"]:
            return
        state["next"] = t + sc.trail.replan_period
        pos = np.array([s.x, s.y])
        if np.linalg.norm(goal - pos) < sc.trail.replan_min_distance:
            return
        try:
            p = plan_trail(env, pos, v_now)
        except (NoPath, InfeasibleBoundary) as exc:
            log.debug("replan at t=%.2f kept previous trajectory: %s", t, exc)
            return
        plans.append(p)
        state["tracker"] = MpcTracker(p.traj, sc.trail.mpc, sc.limits, t)

    logbook, ok, reason = _run_loop(env, lambda: state["tracker"], replan)
    return TrialResult(compute_metrics(sc, "trail", trial, seed, logbook, ok, reason), logbook, plans, env)


def run_mppi(env: Environment, variant: MppiVariant, trial: int = 0, seed: int = 0) -> TrialResult:
    sc = env.scenario
    method = f"mppi-{variant.value}"
    ref_path = None
    if variant is MppiVariant.ASTAR_BUMP:
        try:
            ref_path = plan(env.geo, sc.start[:2], sc.goal, sc.trail.cost_floor, sc.trail.lethal_threshold).points
        except NoPath:
            logbook = RolloutLog()
            logbook.final = UnicycleState(*sc.start)
            return TrialResult(compute_metrics(sc, method, trial, seed, logbook, False, "no_path"), logbook, [], env)
    ctl = MppiController(env.grid_for(variant), sc.goal, variant, sc.mppi, seed, sc.limits, ref_path)
    logbook, ok, reason = _run_loop(env, lambda: ctl)
    return TrialResult(compute_metrics(sc, method, trial, seed, logbook, ok, reason), logbook, [], env)


def run_trial(scenario: ScenarioConfig, method: str, trial: int = 0, seed: int | None = None,
              env: Environment | None = None) -> TrialResult:
    """Run one closed-loop trial of ``method`` and score it."""
    if method not in METHODS:
        raise ConfigInvalid(f"unknown method {method!r}; choose from {METHODS}")
    seed = scenario.sim.seed + trial if seed is None else seed
    env = env or Environment.build(scenario)
    if method == "trail":
        return run_trail(env, trial, seed)
    return run_mppi(env, MppiVariant(method.removeprefix("mppi-")), trial, seed)
