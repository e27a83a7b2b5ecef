"""Unicycle plant, MPC trajectory tracker and the closed-loop simulator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Protocol

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from .field import TerrainField
from .timescale import Trajectory, VehicleLimits


class UnicycleState(NamedTuple):
    x: float
    y: float
    theta: float


class ControlInput(NamedTuple):
    v: float
    omega: float


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def step_dynamics(s: UnicycleState, u: ControlInput, dt: float) -> UnicycleState:
    """Forward-Euler step of the unicycle."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return UnicycleState(
        s.x + dt * math.cos(s.theta) * u.v,
        s.y + dt * math.sin(s.theta) * u.v,
        s.theta + dt * u.omega,
    )


def clamp_input(u: ControlInput, limits: VehicleLimits) -> ControlInput:
    return ControlInput(min(max(u.v, limits.v_min), limits.v_max),
                        min(max(u.omega, limits.omega_min), limits.omega_max))


@dataclass(frozen=True)
class MpcWeights:
    Q: tuple[float, float, float] = (10.0, 10.0, 1.0)
    R: tuple[float, float] = (0.1, 0.1)
    Q_N: tuple[float, float, float] = (20.0, 20.0, 2.0)
    horizon: int = 20
    dt: float = 0.1

    def __post_init__(self) -> None:
        if min(*self.Q, *self.R, *self.Q_N) < 0:
            raise ValueError("MPC weights must be nonnegative")
        if self.horizon < 1 or not self.dt > 0:
            raise ValueError("need horizon >= 1 and dt > 0")


@dataclass
class MpcSolution:
    u: ControlInput
    inputs: NDArray[np.float64]       # (N, 2)
    states: NDArray[np.float64]       # (N+1, 3)
    cost: float
    fallback_cost: float
    fallback: bool = False


def _rollout(s0, U, dt):
    n = len(U)
    X = np.empty((n + 1, 3))
    x, y, th = s0
    X[0] = (x, y, th)
    cos, sin = math.cos, math.sin
    for k in range(n):
        v, w = U[k]
        x += dt * cos(th) * v
        y += dt * sin(th) * v
        th += dt * w
        X[k + 1] = (x, y, th)
    return X


def mpc_cost(s0, U, x_ref, u_ref, weights: MpcWeights, want_grad: bool = False):
    """Tracking cost of an input sequence and, optionally, its gradient by the adjoint recursion."""
    U = np.asarray(U, dtype=float).reshape(-1, 2)
    dt = weights.dt
    X = _rollout(s0, U, dt)
    E = X - x_ref
    E[:, 2] = wrap_angle(E[:, 2])
    Q = np.asarray(weights.Q)
    R = np.asarray(weights.R)
    QN = np.asarray(weights.Q_N)
    du = U - u_ref
    J = float(np.sum(E[:-1] ** 2 * Q) + np.sum(du**2 * R) + np.sum(E[-1] ** 2 * QN))
    if not want_grad:
        return J, X
    n = len(U)
    G = 2.0 * du * R
    lam = 2.0 * QN * E[-1]
    Q2E = 2.0 * Q * E
    for k in range(n - 1, -1, -1):
        th = X[k, 2]
        c, s = math.cos(th), math.sin(th)
        v = U[k, 0]
        G[k, 0] += dt * (c * lam[0] + s * lam[1])
        G[k, 1] += dt * lam[2]
        lam = Q2E[k] + np.array([lam[0], lam[1], lam[2] + dt * v * (-s * lam[0] + c * lam[1])])
    return J, X, G


def mpc_solve(s0: UnicycleState, x_ref: NDArray[np.float64], u_ref: NDArray[np.float64], weights: MpcWeights,
              limits: VehicleLimits, warm_start: NDArray[np.float64] | None = None) -> MpcSolution:
    """Box-constrained single-shooting MPC.

    ``x_ref`` holds ``N + 1`` reference states and ``u_ref`` ``N`` reference
    inputs. L-BFGS-B descends from ``warm_start`` (or the clamped reference
    inputs) and the result never costs more than the clamped reference; when
    it cannot improve on it, the reference is returned with ``fallback`` set.
    """
    N = weights.horizon
    x_ref = np.asarray(x_ref, dtype=float).reshape(N + 1, 3)
    u_ref = np.asarray(u_ref, dtype=float).reshape(N, 2)
    lo = np.array([limits.v_min, limits.omega_min])
    hi = np.array([limits.v_max, limits.omega_max])
    base = np.clip(u_ref, lo, hi)
    base_cost, _ = mpc_cost(s0, base, x_ref, u_ref, weights)
    bounds = [(lo[0], hi[0]), (lo[1], hi[1])] * N

    def fun(z):
        J, _, G = mpc_cost(s0, z.reshape(N, 2), x_ref, u_ref, weights, want_grad=True)
        return J, G.ravel()

    # One descent, from the warm start when available; the clamped reference
    # stays in the running as the fallback either way.
    if warm_start is not None:
        starts = [np.clip(np.asarray(warm_start, dtype=float).reshape(N, 2), lo, hi)]
    else:
        starts = [base]
    best_U, best_J = base, base_cost
    for z0 in starts:
        res = minimize(fun, z0.ravel(), jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 100, "ftol": 1e-12, "gtol": 1e-8})
        U = np.clip(res.x.reshape(N, 2), lo, hi)
        J, _ = mpc_cost(s0, U, x_ref, u_ref, weights)
        if np.isfinite(J) and J < best_J:
            best_U, best_J = U, J
    fallback = best_U is base
    J, X = mpc_cost(s0, best_U, x_ref, u_ref, weights)
    return MpcSolution(ControlInput(float(best_U[0, 0]), float(best_U[0, 1])), best_U, X, J, base_cost, fallback)


class Controller(Protocol):
    def __call__(self, state: UnicycleState, t: float) -> ControlInput: ...


class MpcTracker:
    """Receding-horizon tracker of a time-stamped trajectory."""

    def __init__(self, traj: Trajectory, weights: MpcWeights | None = None, limits: VehicleLimits | None = None,
                 t_offset: float = 0.0):
        self.traj = traj
        self.weights = weights or MpcWeights()
        self.limits = limits or VehicleLimits()
        self.t_offset = t_offset
        self._warm: NDArray[np.float64] | None = None
        self.last: MpcSolution | None = None

    def reference(self, t: float):
        w = self.weights
        times = (t - self.t_offset) + np.arange(w.horizon + 1) * w.dt
        ref = self.traj.sample(times)
        x_ref = np.stack([ref["x"], ref["y"], ref["yaw"]], axis=1)
        u_ref = np.stack([ref["v"], ref["omega"]], axis=1)[:-1]
        return x_ref, u_ref

    def __call__(self, state: UnicycleState, t: float) -> ControlInput:
        x_ref, u_ref = self.reference(t)
        # Express the reference yaw on the same branch as the state.
        shift = x_ref[0, 2] - wrap_angle(x_ref[0, 2] - state.theta) - state.theta
        x_ref[:, 2] -= shift
        sol = mpc_solve(state, x_ref, u_ref, self.weights, self.limits, self._warm)
        self._warm = np.vstack([sol.inputs[1:], sol.inputs[-1:]])
        self.last = sol
        return sol.u


class FeedforwardController:
    """Replays the trajectory's own inputs, linearly interpolated in time."""

    def __init__(self, traj: Trajectory):
        self.traj = traj

    def __call__(self, state: UnicycleState, t: float) -> ControlInput:
        ref = self.traj.sample(t)
        return ControlInput(float(ref["v"]), float(ref["omega"]))


LOG_FIELDS = ("t", "x", "y", "theta", "v", "omega", "v_cmd", "omega_cmd", "bump", "az_proxy")


@dataclass
class RolloutLog:
    rows: dict[str, list[float]] = field(default_factory=lambda: {k: [] for k in LOG_FIELDS})
    final: UnicycleState | None = None

    def append(self, **kw: float) -> None:
        for k in LOG_FIELDS:
            self.rows[k].append(float(kw[k]))

    def __len__(self) -> int:
        return len(self.rows["t"])

    def array(self, key: str) -> NDArray[np.float64]:
        return np.asarray(self.rows[key], dtype=float)

    def extend(self, other: RolloutLog) -> None:
        for k in LOG_FIELDS:
            self.rows[k].extend(other.rows[k])
        self.final = other.final

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_FIELDS)
            for i in range(len(self)):
                w.writerow([repr(self.rows[k][i]) for k in LOG_FIELDS])

    @classmethod
    def from_csv(cls, path: str | Path) -> RolloutLog:
        log = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.append(**{k: float(row[k]) for k in LOG_FIELDS})
        return log


def az_proxy(bump: TerrainField | None, pts, v) -> NDArray[np.float64]:
    """Planar stand-in for vertical acceleration: bumpiness at the position times speed."""
    v = np.asarray(v, dtype=float)
    if bump is None:
        return np.zeros_like(v)
    return bump.values(np.asarray(pts, dtype=float).reshape(-1, 2)) * np.abs(v)


def simulate(bump: TerrainField | None, traj: Trajectory, controller: Callable[[UnicycleState, float], ControlInput],
             duration: float | None = None, dt: float = 0.05, limits: VehicleLimits | None = None,
             initial: UnicycleState | None = None, stop: Callable[[UnicycleState, float], bool] | None = None) -> RolloutLog:
    """Closed-loop rollout of ``controller`` on the unicycle plant.

    One row is logged per control step, recording the state at the start of
    the step, the commanded and applied inputs, and the bumpiness and
    vertical-acceleration proxy at that state.
    """
    log = RolloutLog()
    if len(traj) == 0:
        return log
    limits = limits or VehicleLimits()
    s = initial or UnicycleState(float(traj.points[0, 0]), float(traj.points[0, 1]), float(traj.yaw[0]))
    duration = traj.duration if duration is None else duration
    steps = int(round(duration / dt))
    for k in range(steps):
        t = k * dt
        if stop is not None and stop(s, t):
            break
        cmd = controller(s, t)
        u = clamp_input(cmd, limits)
        b = float(bump.values([[s.x, s.y]])[0]) if bump is not None else 0.0
        log.append(t=t, x=s.x, y=s.y, theta=wrap_angle(s.theta), v=u.v, omega=u.omega,
                   v_cmd=cmd.v, omega_cmd=cmd.omega, bump=b, az_proxy=b * abs(u.v))
        s = step_dynamics(s, u, dt)
    log.final = s
    return log

