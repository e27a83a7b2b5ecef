"""Model predictive path integral (MPPI) baselines on cost rasters.

Reference: G. Williams et al., "Information Theoretic MPC for Model-Based
Reinforcement Learning," ICRA, 2017.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .astar import LETHAL_THRESHOLD
from .costmap import CostGrid
from .timescale import VehicleLimits
from .track import ControlInput, UnicycleState


class MppiVariant(str, enum.Enum):
    GEO = "geo"
    GEO_TERM = "geo-term"
    BUMP = "bump"
    ASTAR_BUMP = "astar-bump"
    FUSED = "fused"


TERMINAL_BOOST = 5.0


@dataclass(frozen=True)
class MppiWeights:
    goal_dist: float = 0.2
    terrain_cost: float = 4.0
    control_effort: float = 0.02
    terminal: float = 2.0
    path_deviation: float = 2.0
    lethal: float = 1000.0


@dataclass(frozen=True)
class MppiConfig:
    horizon: int = 20
    dt: float = 0.1
    samples: int = 4096
    temperature: float = 1.0
    noise_std: tuple[float, float] = (0.6, 0.8)
    weights: MppiWeights = field(default_factory=MppiWeights)
    lethal_threshold: float = LETHAL_THRESHOLD

    def __post_init__(self) -> None:
        if self.samples < 1 or self.horizon < 1:
            raise ValueError("need at least one sample and a positive horizon")
        if not self.temperature > 0 or min(self.noise_std) <= 0 or not self.dt > 0:
            raise ValueError("temperature, noise and dt must be positive")


def rollout_states(s0: ArrayLike, U: NDArray[np.float64], dt: float) -> NDArray[np.float64]:
    """Integrate batched input sequences ``(K, N, 2)`` into states ``(K, N+1, 3)``."""
    U = np.asarray(U, dtype=float)
    K, N, _ = U.shape
    X = np.empty((K, N + 1, 3))
    X[:, 0] = np.asarray(s0, dtype=float)
    for k in range(N):
        th = X[:, k, 2]
        X[:, k + 1, 0] = X[:, k, 0] + dt * np.cos(th) * U[:, k, 0]
        X[:, k + 1, 1] = X[:, k, 1] + dt * np.sin(th) * U[:, k, 0]
        X[:, k + 1, 2] = th + dt * U[:, k, 1]
    return X


def _nearest_path_sqdist(pts, ref_path):
    d, _ = cKDTree(ref_path).query(pts.reshape(-1, 2))
    return (d**2).reshape(pts.shape[:-1])


def rollout_cost(states: ArrayLike, controls: ArrayLike, grid: CostGrid, goal: ArrayLike,
                 variant: MppiVariant | str, cfg: MppiConfig, ref_path: ArrayLike | None = None):
    """Cost of one rollout ``(N+1, 3)`` or a batch ``(K, N+1, 3)``.

    Running terms are summed over the states after the initial one: terrain
    cost sampled from the nearest cell (lethal or out-of-grid cells also pay
    the lethal penalty), distance to goal, and squared input magnitude. The
    terminal distance to goal is weighted five times higher for ``geo-term``;
    ``astar-bump`` adds the mean squared distance to the nearest point of the
    reference path.
    """
    variant = MppiVariant(variant)
    X = np.asarray(states, dtype=float)
    U = np.asarray(controls, dtype=float)
    single = X.ndim == 2
    if single:
        X, U = X[None], U[None]
    w = cfg.weights
    pts = X[:, 1:, :2]
    c = grid.sample_nearest(pts, outside=np.nan)
    bad = np.isnan(c) | (c >= cfg.lethal_threshold)
    c = np.where(np.isnan(c), 1.0, c)
    goal = np.asarray(goal, dtype=float)
    dist = np.hypot(pts[..., 0] - goal[0], pts[..., 1] - goal[1])
    term_w = w.terminal * (TERMINAL_BOOST if variant is MppiVariant.GEO_TERM else 1.0)
    cost = (
        w.terrain_cost * c.sum(axis=1)
        + w.lethal * bad.sum(axis=1)
        + w.goal_dist * dist.sum(axis=1)
        + w.control_effort * np.einsum("knd,knd->k", U, U)
        + term_w * dist[:, -1]
    )
    if variant is MppiVariant.ASTAR_BUMP and ref_path is not None:
        ref = np.asarray(ref_path, dtype=float).reshape(-1, 2)
        cost = cost + w.path_deviation * _nearest_path_sqdist(pts, ref).mean(axis=1)
    return float(cost[0]) if single else cost


def softmax_weights(costs: ArrayLike, temperature: float) -> NDArray[np.float64]:
    c = np.asarray(costs, dtype=float)
    e = np.exp(-(c - c.min()) / temperature)
    return e / e.sum()


@dataclass
class MppiStep:
    u: ControlInput
    sequence: NDArray[np.float64]     # weighted average, before shifting
    nominal: NDArray[np.float64]      # shifted warm start for the next call
    samples: NDArray[np.float64]
    costs: NDArray[np.float64]
    weights: NDArray[np.float64]


def mppi_step(s0: UnicycleState | ArrayLike, nominal: ArrayLike, grid: CostGrid, goal: ArrayLike,
              variant: MppiVariant | str, cfg: MppiConfig, rng: np.random.Generator | int | None = None,
              limits: VehicleLimits | None = None, ref_path: ArrayLike | None = None) -> MppiStep:
    """One MPPI update: perturb, roll out, softmax-average, shift."""
    limits = limits or VehicleLimits()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    nominal = np.asarray(nominal, dtype=float).reshape(cfg.horizon, 2)
    lo = np.array([limits.v_min, limits.omega_min])
    hi = np.array([limits.v_max, limits.omega_max])
    noise = rng.standard_normal((cfg.samples, cfg.horizon, 2)) * np.asarray(cfg.noise_std)
    U = np.clip(nominal[None] + noise, lo, hi)
    X = rollout_states(np.asarray(s0, dtype=float), U, cfg.dt)
    costs = rollout_cost(X, U, grid, goal, variant, cfg, ref_path)
    w = softmax_weights(costs, cfg.temperature)
    seq = np.einsum("k,knd->nd", w, U)
    shifted = np.vstack([seq[1:], seq[-1:]])
    return MppiStep(ControlInput(float(seq[0, 0]), float(seq[0, 1])), seq, shifted, U, costs, w)


class MppiController:
    """Closed-loop MPPI that re-solves every ``cfg.dt`` and holds the input in between."""

    def __init__(self, grid: CostGrid, goal: ArrayLike, variant: MppiVariant | str, cfg: MppiConfig | None = None,
                 seed: int = 0, limits: VehicleLimits | None = None, ref_path: ArrayLike | None = None):
        self.grid = grid
        self.goal = np.asarray(goal, dtype=float)
        self.variant = MppiVariant(variant)
        self.cfg = cfg or MppiConfig()
        self.limits = limits or VehicleLimits()
        self.ref_path = ref_path
        self.rng = np.random.default_rng(seed)
        self.nominal = np.zeros((self.cfg.horizon, 2))
        self._next_solve = -np.inf
        self._u = ControlInput(0.0, 0.0)

    def __call__(self, state: UnicycleState, t: float) -> ControlInput:
        if t + 1e-9 >= self._next_solve:
            step = mppi_step(state, self.nominal, self.grid, self.goal, self.variant, self.cfg, self.rng,
                             self.limits, self.ref_path)
            self.nominal = step.nominal
            self._u = step.u
            self._next_solve = t + self.cfg.dt
        return self._u
