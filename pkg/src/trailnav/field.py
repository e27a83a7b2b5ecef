"""Differentiable terrain fields.

Every field maps a continuous planar query point to a scalar value and its
exact spatial gradient. Fields are immutable; batched evaluation goes through
:meth:`TerrainField.query_many`, which is what the planners use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSpeed, OutOfBounds

SPEED_FLOOR = 0.05


@dataclass(frozen=True)
class Bounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"malformed bounds {self}")

    @classmethod
    def of(cls, b: Bounds | Sequence[float]) -> Bounds:
        if isinstance(b, Bounds):
            return b
        return cls(*(float(v) for v in b))

    def contains(self, pts: ArrayLike, tol: float = 0.0) -> NDArray[np.bool_]:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.x_min - tol)
            & (pts[:, 0] <= self.x_max + tol)
            & (pts[:, 1] >= self.y_min - tol)
            & (pts[:, 1] <= self.y_max + tol)
        )

    def clamp(self, pts: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(pts, dtype=float)
        lo = np.array([self.x_min, self.y_min])
        hi = np.array([self.x_max, self.y_max])
        return np.clip(pts, lo, hi)

    def shifted(self, dx: float, dy: float) -> Bounds:
        return Bounds(self.x_min + dx, self.x_max + dx, self.y_min + dy, self.y_max + dy)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)


@dataclass(frozen=True)
class FieldSample:
    value: float
    gradient: NDArray[np.float64]


class TerrainField:
    """Scalar field over the plane with an analytic gradient.

    Subclasses implement :meth:`_eval` on an ``(n, 2)`` array of points that
    are already inside the bounds. Out-of-bounds handling lives here:

    * ``policy="clamp"`` evaluates at the nearest in-bounds point. The
      gradient is that of the clamped composition, so the component along a
      clamped axis is zero.
    * ``policy="strict"`` raises :class:`OutOfBounds`.
    """

    def __init__(self, bounds: Bounds | Sequence[float] | None = None, policy: str = "clamp"):
        if policy not in ("clamp", "strict"):
            raise ValueError(f"unknown out-of-bounds policy {policy!r}")
        self.bounds = None if bounds is None else Bounds.of(bounds)
        self.policy = policy

    def _eval(self, pts: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        raise NotImplementedError

    def query_many(self, pts: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Evaluate at many points; returns ``(values (n,), gradients (n, 2))``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if self.bounds is None:
            return self._eval(pts)
        inside = self.bounds.contains(pts)
        if inside.all():
            return self._eval(pts)
        if self.policy == "strict":
            bad = pts[~inside][0]
            raise OutOfBounds(f"query point ({bad[0]:.6g}, {bad[1]:.6g}) outside {self.bounds}")
        clamped = self.bounds.clamp(pts)
        values, grads = self._eval(clamped)
        grads = np.where(clamped != pts, 0.0, grads)
        return values, grads

    def query(self, p: ArrayLike) -> FieldSample:
        v, g = self.query_many(np.asarray(p, dtype=float).reshape(1, 2))
        return FieldSample(float(v[0]), g[0].copy())

    def values(self, pts: ArrayLike) -> NDArray[np.float64]:
        return self.query_many(pts)[0]


class ConstantField(TerrainField):
    def __init__(self, value: float, bounds=None, policy: str = "clamp"):
        super().__init__(bounds, policy)
        self.value = float(value)

    def _eval(self, pts):
        n = len(pts)
        return np.full(n, self.value), np.zeros((n, 2))


class PlaneField(TerrainField):
    """``v(x, y) = gx * x + gy * y + offset``."""

    def __init__(self, gx: float, gy: float = 0.0, offset: float = 0.0, bounds=None, policy="clamp"):
        super().__init__(bounds, policy)
        self.gx, self.gy, self.offset = float(gx), float(gy), float(offset)

    def _eval(self, pts):
        v = self.gx * pts[:, 0] + self.gy * pts[:, 1] + self.offset
        g = np.empty_like(pts)
        g[:, 0] = self.gx
        g[:, 1] = self.gy
        return v, g


class GaussianBumpField(TerrainField):
    """Sum of isotropic Gaussians ``a * exp(-|p - c|^2 / (2 sigma^2))``."""

    def __init__(self, centers: ArrayLike, amplitudes: ArrayLike, widths: ArrayLike, bounds=None, policy="clamp"):
        super().__init__(bounds, policy)
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.amplitudes = np.asarray(amplitudes, dtype=float).reshape(-1)
        self.widths = np.asarray(widths, dtype=float).reshape(-1)
        if not (len(self.centers) == len(self.amplitudes) == len(self.widths)):
            raise ValueError("centers, amplitudes and widths must have equal length")
        if np.any(self.widths <= 0):
            raise ValueError("bump widths must be positive")
        for arr in (self.centers, self.amplitudes, self.widths):
            arr.setflags(write=False)

    def _eval(self, pts):
        n = len(pts)
        if len(self.centers) == 0:
            return np.zeros(n), np.zeros((n, 2))
        d = pts[:, None, :] - self.centers[None, :, :]  # (n, k, 2)
        inv_var = 1.0 / (self.widths**2)
        e = self.amplitudes * np.exp(-0.5 * np.einsum("nkd,nkd->nk", d, d) * inv_var)
        v = e.sum(axis=1)
        g = -np.einsum("nk,nkd->nd", e * inv_var, d)
        return v, g


def gaussian_bump_field(centers: Iterable[tuple[ArrayLike, float, float]], bounds=None, policy="clamp") -> GaussianBumpField:
    """Build a bump field from ``(center, amplitude, width)`` triples."""
    items = list(centers)
    if not items:
        return GaussianBumpField(np.zeros((0, 2)), [], [], bounds, policy)
    c = [np.asarray(it[0], dtype=float) for it in items]
    return GaussianBumpField(c, [it[1] for it in items], [it[2] for it in items], bounds, policy)


def _sigmoid(x):
    # Split by sign so exp never overflows.
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x):
    if np.ndim(x) == 0:
        return float(_sigmoid(np.array([x]))[0])
    return _sigmoid(x)


class BoxStepField(TerrainField):
    """Rectangular plateau of ``height`` with logistic edges of width ``edge``."""

    def __init__(self, x0, x1, y0, y1, height: float, edge: float = 0.1, bounds=None, policy="clamp"):
        super().__init__(bounds, policy)
        if edge <= 0:
            raise ValueError("edge width must be positive")
        self.x0, self.x1, self.y0, self.y1 = map(float, (x0, x1, y0, y1))
        self.height = float(height)
        self.edge = float(edge)

    def _axis(self, u, lo, hi):
        s_lo = _sigmoid((u - lo) / self.edge)
        s_hi = _sigmoid((u - hi) / self.edge)
        val = s_lo - s_hi
        der = (s_lo * (1 - s_lo) - s_hi * (1 - s_hi)) / self.edge
        return val, der

    def _eval(self, pts):
        fx, dfx = self._axis(pts[:, 0], self.x0, self.x1)
        fy, dfy = self._axis(pts[:, 1], self.y0, self.y1)
        v = self.height * fx * fy
        g = np.stack([self.height * dfx * fy, self.height * fx * dfy], axis=1)
        return v, g


class SumField(TerrainField):
    def __init__(self, fields: Sequence[TerrainField], bounds=None, policy="clamp"):
        super().__init__(bounds, policy)
        self.fields = tuple(fields)

    def _eval(self, pts):
        v = np.zeros(len(pts))
        g = np.zeros((len(pts), 2))
        for f in self.fields:
            fv, fg = f.query_many(pts)
            v += fv
            g += fg
        return v, g


class SquashedField(TerrainField):
    """Logistic squash ``sigmoid(scale * v + offset)`` of another field."""

    def __init__(self, inner: TerrainField, scale: float = 1.0, offset: float = 0.0):
        super().__init__(inner.bounds, inner.policy)
        self.inner = inner
        self.scale = float(scale)
        self.offset = float(offset)

    def query_many(self, pts):
        v, g = self.inner.query_many(pts)
        s = _sigmoid(self.scale * v + self.offset)
        return s, (s * (1.0 - s) * self.scale)[:, None] * g


def squash_to_unit(field: TerrainField, scale: float = 1.0, offset: float = 0.0) -> SquashedField:
    return SquashedField(field, scale, offset)


def bumpiness_label(accel_rms: float, speed: float, speed_floor: float = SPEED_FLOOR,
                    scale: float = 1.0, offset: float = 0.0) -> float:
    """Speed-normalised vertical-acceleration RMS squashed into (0, 1)."""
    if not speed > speed_floor:
        raise DegenerateSpeed(f"speed {speed} m/s at or below floor {speed_floor} m/s")
    return sigmoid(scale * (accel_rms / speed) + offset)


def _catmull_rom_weights(t):
    """Keys cubic (a = -0.5) weights for nodes -1..2 and their t-derivatives."""
    t2 = t * t
    t3 = t2 * t
    w = np.stack([
        0.5 * (-t3 + 2 * t2 - t),
        0.5 * (3 * t3 - 5 * t2 + 2),
        0.5 * (-3 * t3 + 4 * t2 + t),
        0.5 * (t3 - t2),
    ], axis=-1)
    dw = np.stack([
        0.5 * (-3 * t2 + 4 * t - 1),
        0.5 * (9 * t2 - 10 * t),
        0.5 * (-9 * t2 + 8 * t + 1),
        0.5 * (3 * t2 - 2 * t),
    ], axis=-1)
    return w, dw


class GriddedField(TerrainField):
    """Field interpolated from a raster of node values.

    ``values[r, c]`` sits at ``origin + (c * resolution, r * resolution)``;
    rows run along +y. Bounds are the hull of the nodes.
    """

    def __init__(self, origin: ArrayLike, resolution: float, values: ArrayLike,
                 interpolation: str = "bicubic", policy: str = "clamp"):
        vals = np.array(values, dtype=float)
        if vals.ndim != 2 or min(vals.shape) < 2:
            raise ValueError("GriddedField needs a 2-D array with at least 2x2 nodes")
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        if interpolation not in ("bilinear", "bicubic"):
            raise ValueError(f"unknown interpolation {interpolation!r}")
        ox, oy = (float(v) for v in np.asarray(origin, dtype=float).reshape(2))
        rows, cols = vals.shape
        super().__init__(Bounds(ox, ox + (cols - 1) * resolution, oy, oy + (rows - 1) * resolution), policy)
        self.origin = np.array([ox, oy])
        self.resolution = float(resolution)
        self.interpolation = interpolation
        vals.setflags(write=False)
        self.grid = vals
        self.origin.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def _cell(self, pts):
        rows, cols = self.grid.shape
        f = (pts - self.origin) / self.resolution
        ix = np.clip(np.floor(f[:, 0]).astype(int), 0, cols - 2)
        iy = np.clip(np.floor(f[:, 1]).astype(int), 0, rows - 2)
        return ix, iy, f[:, 0] - ix, f[:, 1] - iy

    def _eval(self, pts):
        ix, iy, tx, ty = self._cell(pts)
        if self.interpolation == "bilinear":
            V = self.grid
            v00 = V[iy, ix]
            v01 = V[iy, ix + 1]
            v10 = V[iy + 1, ix]
            v11 = V[iy + 1, ix + 1]
            # (1 - t) a + t b is exact at both t = 0 and t = 1.
            a = v00 * (1 - tx) + v01 * tx
            b = v10 * (1 - tx) + v11 * tx
            val = a * (1 - ty) + b * ty
            gx = ((v01 - v00) * (1 - ty) + (v11 - v10) * ty) / self.resolution
            gy = (b - a) / self.resolution
            return val, np.stack([gx, gy], axis=1)
        rows, cols = self.grid.shape
        offs = np.arange(-1, 3)
        cx = np.clip(ix[:, None] + offs, 0, cols - 1)  # (n, 4)
        cy = np.clip(iy[:, None] + offs, 0, rows - 1)
        patch = self.grid[cy[:, :, None], cx[:, None, :]]  # (n, 4, 4)
        wx, dwx = _catmull_rom_weights(tx)
        wy, dwy = _catmull_rom_weights(ty)
        val = np.einsum("ni,nij,nj->n", wy, patch, wx)
        gx = np.einsum("ni,nij,nj->n", wy, patch, dwx) / self.resolution
        gy = np.einsum("ni,nij,nj->n", dwy, patch, wx) / self.resolution
        return val, np.stack([gx, gy], axis=1)

    def to_raster(self) -> dict:
        return raster_dict(self.origin, self.resolution, self.grid)

    @classmethod
    def from_raster(cls, raster: dict, interpolation: str = "bicubic", policy: str = "clamp") -> GriddedField:
        origin, res, values = parse_raster(raster)
        return cls(origin, res, values, interpolation, policy)


def raster_dict(origin: ArrayLike, resolution: float, values: ArrayLike) -> dict:
    """Raster JSON payload; ``values`` is row-major with row 0 at ``origin_y``."""
    values = np.asarray(values, dtype=float)
    return {
        "origin_x": float(origin[0]),
        "origin_y": float(origin[1]),
        "resolution": float(resolution),
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        "values": [float(v) for v in values.ravel()],
    }


def parse_raster(raster: dict) -> tuple[NDArray[np.float64], float, NDArray[np.float64]]:
    try:
        rows, cols = int(raster["rows"]), int(raster["cols"])
        values = np.asarray(raster["values"], dtype=float)
        origin = np.array([float(raster["origin_x"]), float(raster["origin_y"])])
        res = float(raster["resolution"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed raster: {exc}") from exc
    if values.size != rows * cols:
        raise ValueError(f"raster declares {rows}x{cols} but holds {values.size} values")
    if not math.isfinite(res) or res <= 0:
        raise ValueError("raster resolution must be positive")
    return origin, res, values.reshape(rows, cols)


def save_raster(path: str | Path, raster: dict) -> None:
    Path(path).write_text(json.dumps(raster))


def load_raster(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
