"""Gradient-based refinement of a path's interior control points.

The objective trades a travel-time surrogate against a speed-weighted bump
cost, with penalties on segment length and curvature. Speeds come from a
smooth-minimum fusion of a curvature cap and the closed-form preferred
speed, so the whole chain from control points to cost is differentiable;
:func:`objective` returns its exact gradient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .field import Bounds, TerrainField
from .spline import DensePath, interpolate, menger_curvature

VBAR_FLOOR = 1e-3


@dataclass(frozen=True)
class SpeedParams:
    v_max: float = 2.0
    a_lat_max: float = 1.5
    tau: float = 0.1
    eps_kappa: float = 1e-6
    w_time: float = 1.0
    w_bump: float = 1.0
    alpha: int = 2
    eps_bump: float = 1e-3

    def __post_init__(self) -> None:
        if min(self.v_max, self.a_lat_max, self.tau, self.eps_kappa, self.w_time, self.w_bump, self.eps_bump) <= 0:
            raise ValueError("speed parameters must be positive")
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be a positive integer")


@dataclass(frozen=True)
class ObjectiveWeights:
    lambda_b: float = 1.0
    lambda_s: float = 0.5
    lambda_kappa: float = 1.0

    def __post_init__(self) -> None:
        if min(self.lambda_b, self.lambda_s, self.lambda_kappa) < 0:
            raise ValueError("objective weights must be nonnegative")


@dataclass(frozen=True)
class FootprintSpec:
    side: float = 0.6
    samples_per_side: int = 3

    def __post_init__(self) -> None:
        if self.side <= 0 or self.samples_per_side < 1:
            raise ValueError("footprint needs side > 0 and at least one sample per side")

    def offsets(self) -> NDArray[np.float64]:
        """Body-frame lattice, one sample at the centre of each of the k x k sub-squares."""
        k = self.samples_per_side
        u = (np.arange(k) + 0.5) / k * self.side - 0.5 * self.side
        X, Y = np.meshgrid(u, u)
        return np.stack([X.ravel(), Y.ravel()], axis=1)


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.05
    iterations: int = 50
    grad_clip_norm: float = 1.0
    bounds: Bounds | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_dense: int = 64

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.bounds is not None:
            self.bounds = Bounds.of(self.bounds)


def smin(a, b, tau: float):
    """Smooth minimum ``-tau * log(exp(-a/tau) + exp(-b/tau))``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = np.minimum(a, b)
    out = m - tau * np.log(np.exp(-(a - m) / tau) + np.exp(-(b - m) / tau))
    return float(out) if out.ndim == 0 else out


def smin_grad(a, b, tau: float):
    """Smooth minimum with its partials ``(value, d/da, d/db)``; the partials sum to one."""
    m = np.minimum(a, b)
    ea = np.exp(-(a - m) / tau)
    eb = np.exp(-(b - m) / tau)
    z = ea + eb
    return m - tau * np.log(z), ea / z, eb / z


def path_yaw(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Heading of each sample from the forward difference; the last copies its predecessor."""
    if len(points) < 2:
        return np.zeros(len(points))
    d = np.diff(points, axis=0)
    yaw = np.arctan2(d[:, 1], d[:, 0])
    return np.concatenate([yaw, yaw[-1:]])


def _footprint(bump: TerrainField, centers, yaws, fp: FootprintSpec):
    off = fp.offsets()
    c, s = np.cos(yaws), np.sin(yaws)
    rx = c[:, None] * off[None, :, 0] - s[:, None] * off[None, :, 1]
    ry = s[:, None] * off[None, :, 0] + c[:, None] * off[None, :, 1]
    n, k = rx.shape
    v, g = bump.query_many(np.stack([(centers[:, None, 0] + rx).ravel(), (centers[:, None, 1] + ry).ravel()], axis=1))
    g = g.reshape(n, k, 2)
    db_dyaw = (g[..., 1] * rx - g[..., 0] * ry).mean(axis=1)
    return v.reshape(n, k).mean(axis=1), g.mean(axis=1), db_dyaw


def footprint_bumpiness(bump: TerrainField, center: ArrayLike, yaw: float, fp: FootprintSpec) -> float:
    """Mean bumpiness over the yaw-aligned square footprint at ``center``."""
    b, _, _ = _footprint(bump, np.asarray(center, dtype=float).reshape(1, 2), np.array([float(yaw)]), fp)
    return float(b[0])


def footprint_bumpiness_many(bump: TerrainField, centers, yaws, fp: FootprintSpec):
    """Vectorised footprint means with their derivatives w.r.t. centre and yaw.

    Returns ``(b (n,), db_dcenter (n, 2), db_dyaw (n,))``.
    """
    return _footprint(bump, np.asarray(centers, dtype=float).reshape(-1, 2), np.asarray(yaws, dtype=float).reshape(-1), fp)


def preferred_speed(b, params: SpeedParams):
    """Minimiser of ``w_time / v + w_bump * b**alpha * v`` (with the bump epsilon)."""
    b = np.asarray(b, dtype=float)
    return np.sqrt(params.w_time / (params.w_bump * (b**params.alpha + params.eps_bump)))


def curvature_speed_cap(kappa, params: SpeedParams):
    return np.sqrt(params.a_lat_max / (np.abs(np.asarray(kappa, dtype=float)) + params.eps_kappa))


def _speeds(kappa, b, params: SpeedParams):
    raw_cap = curvature_speed_cap(kappa, params)
    v_cap, _, dcap_draw = smin_grad(params.v_max, raw_cap, params.tau)
    denom = b**params.alpha + params.eps_bump
    v_pref = np.sqrt(params.w_time / (params.w_bump * denom))
    v, dv_dcap, dv_dpref = smin_grad(v_cap, v_pref, params.tau)
    draw_dk = -0.5 * raw_cap / (np.abs(kappa) + params.eps_kappa) * np.sign(kappa)
    dv_dk = dv_dcap * dcap_draw * draw_dk
    dpref_db = -0.5 * v_pref / denom * params.alpha * b ** (params.alpha - 1)
    dv_db = dv_dpref * dpref_db
    return v, v_cap, v_pref, dv_dk, dv_db


def speed_profile_soft(path: DensePath | ArrayLike, bump_vals: ArrayLike, params: SpeedParams) -> NDArray[np.float64]:
    """Per-sample speeds ``smin(smin(v_max, curvature cap), preferred speed)``.

    ``path`` is a :class:`DensePath` or an array of per-sample curvatures.
    """
    kappa = path.curvatures if isinstance(path, DensePath) else np.asarray(path, dtype=float)
    return _speeds(kappa, np.asarray(bump_vals, dtype=float), params)[0]


@dataclass
class ObjectiveValue:
    J: float
    grad: NDArray[np.float64] | None   # (M-2, 2), interior control points
    terms: dict[str, float]
    path: DensePath
    bumps: NDArray[np.float64]
    speeds: NDArray[np.float64]


def objective(ctrl: ArrayLike, bump: TerrainField, weights: ObjectiveWeights, params: SpeedParams,
              fp: FootprintSpec, n_dense: int = 64, want_grad: bool = True) -> ObjectiveValue:
    """Evaluate the trajectory cost of a control polygon and its gradient.

    The gradient covers interior control points only and is exact for the
    implemented function, including the footprint's dependence on the
    path tangent.
    """
    c = np.asarray(ctrl, dtype=float)
    path = interpolate(c, n_dense, jacobian=want_grad)
    p = path.points
    N = len(p)
    ds = path.seg_lengths
    yaw = path_yaw(p)
    b, db_dp, db_dyaw = footprint_bumpiness_many(bump, p, yaw, fp)
    kappa = path.curvatures
    v, _, _, dv_dk, dv_db = _speeds(kappa, b, params)

    vbar_raw = 0.5 * (v[:-1] + v[1:])
    floored = vbar_raw < VBAR_FLOOR
    vbar = np.where(floored, VBAR_FLOOR, vbar_raw)
    bbar = 0.5 * (b[:-1] + b[1:])
    kbar = 0.5 * (kappa[:-1] + kappa[1:])

    t_time = float(np.sum(ds / vbar))
    t_bump = float(np.sum(bbar * vbar * ds))
    t_smooth = float(np.sum(ds * ds))
    t_curv = float(np.sum(kbar[1:] ** 2))
    J = t_time + weights.lambda_b * t_bump + weights.lambda_s * t_smooth + weights.lambda_kappa * t_curv
    terms = {"time": t_time, "bump": t_bump, "smooth": t_smooth, "curvature": t_curv}
    if not want_grad:
        return ObjectiveValue(J, None, terms, path, b, v)

    lb = weights.lambda_b
    g_ds = 1.0 / vbar + lb * bbar * vbar + 2.0 * weights.lambda_s * ds
    g_vbar = np.where(floored, 0.0, -ds / vbar**2 + lb * bbar * ds)
    g_bbar = lb * vbar * ds
    g_kbar = np.zeros(N - 1)
    g_kbar[1:] = 2.0 * weights.lambda_kappa * kbar[1:]

    g_v = np.zeros(N)
    g_v[:-1] += 0.5 * g_vbar
    g_v[1:] += 0.5 * g_vbar
    g_b = np.zeros(N)
    g_b[:-1] += 0.5 * g_bbar
    g_b[1:] += 0.5 * g_bbar
    g_k = np.zeros(N)
    g_k[:-1] += 0.5 * g_kbar
    g_k[1:] += 0.5 * g_kbar
    g_k += g_v * dv_dk
    g_b += g_v * dv_db

    g_p = g_b[:, None] * db_dp
    seg_vec = np.diff(p, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(ds[:, None] > 0, seg_vec / np.where(ds > 0, ds, 1.0)[:, None], 0.0)
    g_p[1:] += g_ds[:, None] * unit
    g_p[:-1] -= g_ds[:, None] * unit
    if N >= 2:
        # Yaw of sample i follows segment i; the last sample reuses the last segment.
        g_yaw = g_b * db_dyaw
        g_seg_yaw = g_yaw[:-1].copy()
        g_seg_yaw[-1] += g_yaw[-1]
        with np.errstate(invalid="ignore", divide="ignore"):
            dyaw = np.where(ds[:, None] > 0, np.stack([-seg_vec[:, 1], seg_vec[:, 0]], axis=1)
                            / np.where(ds > 0, ds * ds, 1.0)[:, None], 0.0)
        g_p[1:] += g_seg_yaw[:, None] * dyaw
        g_p[:-1] -= g_seg_yaw[:, None] * dyaw
    if N >= 3:
        _, k1, k2, k3 = menger_curvature(p[:-2], p[1:-1], p[2:], want_grad=True)
        g_trip = g_k[1:-1].copy()
        g_trip[0] += g_k[0]
        g_trip[-1] += g_k[-1]
        g_p[:-2] += g_trip[:, None] * k1
        g_p[1:-1] += g_trip[:, None] * k2
        g_p[2:] += g_trip[:, None] * k3
    grad = np.einsum("nd,ndme->me", g_p, path.jacobian)[1:-1]
    return ObjectiveValue(J, grad, terms, path, b, v)


@dataclass
class OptimizeResult:
    ctrl: NDArray[np.float64]
    J: float
    J_initial: float
    best_iteration: int
    trace: list[dict] = field(default_factory=list)


def optimize(initial: ArrayLike, bump: TerrainField, weights: ObjectiveWeights, params: SpeedParams,
             fp: FootprintSpec, cfg: OptimizerConfig) -> OptimizeResult:
    """Refine interior control points with clipped, bound-projected Adam.

    The end points never move. The best iterate seen is returned, so the
    result never scores worse than the input.
    """
    x = np.array(initial, dtype=float)
    if len(x) < 3 or cfg.iterations == 0:
        val = objective(x, bump, weights, params, fp, cfg.n_dense, want_grad=False)
        return OptimizeResult(x, val.J, val.J, 0, [])
    m = np.zeros_like(x[1:-1])
    s = np.zeros_like(m)
    best_x, best_J, best_it = x.copy(), math.inf, 0
    trace: list[dict] = []
    J0 = None
    for it in range(cfg.iterations + 1):
        val = objective(x, bump, weights, params, fp, cfg.n_dense, want_grad=it < cfg.iterations)
        if J0 is None:
            J0 = val.J
        if val.J < best_J:
            best_J, best_x, best_it = val.J, x.copy(), it
        row = {"iteration": it, "J": val.J, **val.terms}
        if it == cfg.iterations:
            row["grad_norm"] = float("nan")
            trace.append(row)
            break
        g = val.grad
        gnorm = float(np.sqrt(np.sum(g * g)))
        row["grad_norm"] = gnorm
        trace.append(row)
        if not np.isfinite(gnorm):
            break
        if gnorm > cfg.grad_clip_norm:
            g = g * (cfg.grad_clip_norm / gnorm)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        s = cfg.beta2 * s + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** (it + 1))
        s_hat = s / (1 - cfg.beta2 ** (it + 1))
        x[1:-1] -= cfg.learning_rate * m_hat / (np.sqrt(s_hat) + cfg.adam_eps)
        if cfg.bounds is not None:
            x[1:-1] = cfg.bounds.clamp(x[1:-1])
    return OptimizeResult(best_x, best_J, J0, best_it, trace)


TRACE_FIELDS = ("iteration", "J", "time", "bump", "smooth", "curvature", "grad_norm")


def write_trace_csv(trace: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, extrasaction="ignore")
        w.writeheader()
        for row in trace:
            w.writerow(row)


def config_dict(*objs) -> dict:
    out = {}
    for o in objs:
        d = asdict(o)
        if isinstance(d.get("bounds"), dict):
            d["bounds"] = list(d["bounds"].values())
        out[type(o).__name__] = d
    return out
