"""Forward/backward time-scaling of a fixed geometric path."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InfeasibleBoundary
from .spline import DensePath, path_curvatures
from .trajopt import SpeedParams, preferred_speed


@dataclass(frozen=True)
class VehicleLimits:
    v_max: float = 2.0
    a_lat_max: float = 1.5
    a_acc: float = 1.0
    a_dec: float = 1.5
    v_min: float = 0.0
    omega_min: float = -1.5
    omega_max: float = 1.5

    def __post_init__(self) -> None:
        if min(self.v_max, self.a_lat_max, self.a_acc, self.a_dec, self.omega_max) <= 0:
            raise ValueError("vehicle limits must be positive")
        if not 0.0 <= self.v_min <= self.v_max:
            raise ValueError("need 0 <= v_min <= v_max")
        if self.omega_min >= 0:
            raise ValueError("omega_min must be negative")


@dataclass
class Trajectory:
    t: NDArray[np.float64]
    points: NDArray[np.float64]
    yaw: NDArray[np.float64]
    v: NDArray[np.float64]
    omega: NDArray[np.float64]
    kappa: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1]) if len(self.t) else 0.0

    def sample(self, times: ArrayLike) -> dict[str, NDArray[np.float64]]:
        """Linear interpolation of the state and inputs at ``times`` (held at the ends)."""
        times = np.asarray(times, dtype=float)
        if len(self.t) == 1:
            n = times.shape
            return {"x": np.full(n, self.points[0, 0]), "y": np.full(n, self.points[0, 1]),
                    "yaw": np.full(n, self.yaw[0]), "v": np.full(n, self.v[0]), "omega": np.full(n, self.omega[0])}
        return {
            "x": np.interp(times, self.t, self.points[:, 0]),
            "y": np.interp(times, self.t, self.points[:, 1]),
            "yaw": np.interp(times, self.t, self.yaw),
            "v": np.interp(times, self.t, self.v),
            "omega": np.interp(times, self.t, self.omega),
        }

    def to_records(self) -> list[dict[str, float]]:
        return [
            {"t": float(t), "x": float(p[0]), "y": float(p[1]), "yaw": float(y), "v": float(v), "omega": float(w)}
            for t, p, y, v, w in zip(self.t, self.points, self.yaw, self.v, self.omega)
        ]

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_records()))


def speed_targets(kappa, bump_vals, limits: VehicleLimits, params: SpeedParams | None = None):
    """Hard per-sample speed ceilings before the acceleration passes.

    The ceiling is the smallest of ``v_max``, the lateral-acceleration limit,
    the preferred bump speed (when bump values are given) and the speed at
    which ``|v * kappa|`` would hit the angular-rate bound.
    """
    kappa = np.asarray(kappa, dtype=float)
    eps = params.eps_kappa if params is not None else 1e-6
    cap = np.minimum(limits.v_max, np.sqrt(limits.a_lat_max / (np.abs(kappa) + eps)))
    # The lateral cap above uses |k| + eps; also bound v^2 |k| exactly.
    with np.errstate(divide="ignore"):
        exact = np.where(kappa != 0, np.sqrt(limits.a_lat_max / np.abs(kappa)), np.inf)
    cap = np.minimum(cap, exact)
    if bump_vals is not None and params is not None:
        cap = np.minimum(cap, preferred_speed(np.asarray(bump_vals, dtype=float), params))
    with np.errstate(divide="ignore"):
        w_cap = np.where(kappa > 0, limits.omega_max / np.where(kappa > 0, kappa, 1.0),
                         np.where(kappa < 0, limits.omega_min / np.where(kappa < 0, kappa, 1.0), np.inf))
    return np.minimum(cap, w_cap)


def time_scale(path: DensePath | ArrayLike, bump_vals: ArrayLike | None, limits: VehicleLimits,
               params: SpeedParams | None = None, boundary: tuple[float, float] = (0.0, 0.0),
               clamp_boundary: bool = False) -> Trajectory:
    """Assign speeds and timestamps along a path.

    Speeds start from :func:`speed_targets`, then a forward pass enforces the
    acceleration limit from ``v_start`` and a backward pass enforces the
    deceleration limit into ``v_end``. Timestamps use the trapezoidal rule.

    Raises:
        InfeasibleBoundary: a boundary speed cannot be met under the limits,
            unless ``clamp_boundary`` lowers it to the nearest feasible value.
    """
    if isinstance(path, DensePath):
        pts = path.points
        kappa = path.curvatures
    else:
        pts = np.asarray(path, dtype=float).reshape(-1, 2)
        kappa = path_curvatures(pts)
    if len(pts) < 2:
        raise ValueError("time scaling needs at least two samples")
    v_start, v_end = (float(v) for v in boundary)
    if v_start < 0 or v_end < 0:
        raise InfeasibleBoundary("boundary speeds must be nonnegative")

    ds = np.hypot(*np.diff(pts, axis=0).T)
    if ds.sum() <= 1e-12:
        yaw0 = 0.0
        return Trajectory(np.array([0.0]), pts[:1].copy(), np.array([yaw0]), np.array([v_start]),
                          np.array([0.0]), np.array([0.0]))

    target = speed_targets(kappa, bump_vals, limits, params)
    tol = 1e-9
    if v_start > target[0] + tol or v_end > target[-1] + tol:
        if not clamp_boundary:
            raise InfeasibleBoundary(
                f"boundary speeds ({v_start:.3g}, {v_end:.3g}) exceed local limits ({target[0]:.3g}, {target[-1]:.3g})")
        v_start = min(v_start, float(target[0]))
        v_end = min(v_end, float(target[-1]))

    n = len(pts)
    fwd = target.copy()
    fwd[0] = v_start
    for i in range(n - 1):
        fwd[i + 1] = min(fwd[i + 1], math.sqrt(fwd[i] ** 2 + 2.0 * limits.a_acc * ds[i]))
    if v_end > fwd[-1] + tol:
        if not clamp_boundary:
            raise InfeasibleBoundary(f"end speed {v_end:.3g} unreachable; at most {fwd[-1]:.3g}")
        v_end = float(fwd[-1])
    v = fwd.copy()
    v[-1] = min(v[-1], v_end)
    for i in range(n - 2, -1, -1):
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * limits.a_dec * ds[i]))
    if v[0] < v_start - tol:
        if not clamp_boundary:
            raise InfeasibleBoundary(f"cannot brake from {v_start:.3g} m/s in time; at most {v[0]:.3g}")

    vsum = v[:-1] + v[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        dt = np.where(vsum > 0, 2.0 * ds / np.where(vsum > 0, vsum, 1.0), 0.0)
    t = np.concatenate([[0.0], np.cumsum(dt)])
    d = np.diff(pts, axis=0)
    yaw = np.unwrap(np.concatenate([np.arctan2(d[:, 1], d[:, 0]), [math.atan2(d[-1, 1], d[-1, 0])]]))
    omega = v * kappa
    return Trajectory(t, pts.copy(), yaw, v, omega, np.asarray(kappa, dtype=float).copy())
