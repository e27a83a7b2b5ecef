"""Centripetal Catmull-Rom paths with exact control-point Jacobians.

Each segment between control points ``c[m]`` and ``c[m+1]`` is evaluated in
its cubic Hermite form, whose end tangents come from the centripetal knot
spacing ``d = |c[m+1] - c[m]|**0.5``. The ends of the polygon get phantom
points by quadratic extrapolation (``3 c0 - 3 c1 + c2``), which makes the end
tangent that of the parabola through the first three points; with only two
control points the phantoms are plain reflections.

Dense paths are produced in two passes: a fixed number of parameter-uniform
samples per segment gives a fine polyline whose cumulative chord length is
inverted to place the dense samples at uniform arc length. Every step is a
smooth function of the control points (piecewise, with the fine bracket
index held fixed), and :func:`interpolate` can return the exact Jacobian
of the dense points through all of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateControl

KNOT_EPS = 1e-9
FINE_PER_SEGMENT = 16
CURVATURE_EPS = 1e-12


@dataclass
class DensePath:
    points: NDArray[np.float64]          # (N, 2)
    seg_lengths: NDArray[np.float64]     # (N-1,)
    curvatures: NDArray[np.float64]      # (N,)
    segment: NDArray[np.int64]           # control segment of each sample
    lam: NDArray[np.float64]             # local parameter in [0, 1]
    jacobian: NDArray[np.float64] | None = None  # (N, 2, M, 2)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        return float(self.seg_lengths.sum())


def _as_ctrl(ctrl: ArrayLike) -> NDArray[np.float64]:
    c = np.asarray(ctrl, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2:
        raise ValueError("control polygon must be an (M, 2) array")
    if len(c) < 2:
        raise DegenerateControl("need at least two control points")
    if not np.isfinite(c).all():
        raise DegenerateControl("control points must be finite")
    return c


def phantom_matrix(M: int) -> NDArray[np.float64]:
    """Linear map from ``M`` control points to the ``M + 2`` extended points."""
    L = np.zeros((M + 2, M))
    L[1:M + 1] = np.eye(M)
    if M >= 3:
        L[0, :3] = (3.0, -3.0, 1.0)
        L[M + 1, M - 3:] = (1.0, -3.0, 3.0)
    else:
        L[0, :2] = (2.0, -1.0)
        L[M + 1, :2] = (-1.0, 2.0)
    return L


def _knots(Q):
    """Knot intervals between extended points and their derivative w.r.t. the later point."""
    delta = np.diff(Q, axis=0)
    r = np.hypot(delta[:, 0], delta[:, 1])
    d = np.sqrt(r)
    small = d < KNOT_EPS
    d = np.where(small, KNOT_EPS, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(small[:, None], 0.0, delta / (2.0 * r[:, None] ** 1.5))
    return d, dd


def _hermite(lam):
    l2 = lam * lam
    l3 = l2 * lam
    h = np.stack([2 * l3 - 3 * l2 + 1, l3 - 2 * l2 + lam, -2 * l3 + 3 * l2, l3 - l2], axis=-1)
    dh = np.stack([6 * l2 - 6 * lam, 3 * l2 - 4 * lam + 1, -6 * l2 + 6 * lam, 3 * l2 - 2 * lam], axis=-1)
    return h, dh


def _weights(lam, d0, d1, d2):
    """Scalar weights of the four local points, their lambda-derivative and knot-derivative.

    Returns ``W (n, 4)``, ``dW_dlam (n, 4)`` and ``dW_dd (n, 4, 3)``.
    """
    s01 = d0 + d1
    s12 = d1 + d2
    a = d1 * d1 / (d0 * s01)
    g = d0 / s01
    b = d1 * d1 / (d2 * s12)
    e = d2 / s12
    da = np.stack([-d1 * d1 * (2 * d0 + d1) / (d0 * d0 * s01 * s01),
                   d1 * (2 * d0 + d1) / (d0 * s01 * s01), np.zeros_like(d0)], axis=-1)
    dg = np.stack([d1 / (s01 * s01), -d0 / (s01 * s01), np.zeros_like(d0)], axis=-1)
    db = np.stack([np.zeros_like(d0), d1 * (2 * d2 + d1) / (d2 * s12 * s12),
                   -d1 * d1 * (2 * d2 + d1) / (d2 * d2 * s12 * s12)], axis=-1)
    de = np.stack([np.zeros_like(d0), -d2 / (s12 * s12), d1 / (s12 * s12)], axis=-1)

    h, dh = _hermite(lam)
    h00, h10, h01, h11 = h.T
    W = np.stack([-a * h10, h00 + (a - g) * h10 - e * h11, h01 + g * h10 + (e - b) * h11, b * h11], axis=-1)
    d00, d10, d01, d11 = dh.T
    dW = np.stack([-a * d10, d00 + (a - g) * d10 - e * d11, d01 + g * d10 + (e - b) * d11, b * d11], axis=-1)
    h10 = h10[:, None]
    h11 = h11[:, None]
    dWd = np.stack([
        -h10 * da,
        h10 * (da - dg) - h11 * de,
        h10 * dg + h11 * (de - db),
        h11 * db,
    ], axis=1)
    return W, dW, dWd


def _eval_segments(Q, d, dd, seg, lam, want_jac: bool):
    """Evaluate curve points (and tangents, Jacobians w.r.t. ``Q``) at ``(seg, lam)``."""
    n = len(seg)
    W, dW, dWd = _weights(lam, d[seg], d[seg + 1], d[seg + 2])
    local = Q[seg[:, None] + np.arange(4)]  # (n, 4, 2)
    pts = np.einsum("nk,nkd->nd", W, local)
    tangent = np.einsum("nk,nkd->nd", dW, local)
    if not want_jac:
        return pts, tangent, None
    # Sensitivity of the point to each of the three knot intervals: (n, 2, 3)
    dp_dd = np.einsum("nkj,nkd->ndj", dWd, local)
    J = np.zeros((n, 2, len(Q), 2))
    ar = np.arange(n)
    eye = np.eye(2)
    for k in range(4):
        J[ar, :, seg + k, :] += W[:, k, None, None] * eye
    for i in range(3):
        # Interval i joins local points i and i+1.
        g = dp_dd[:, :, i, None] * dd[seg + i][:, None, :]  # (n, 2, 2)
        J[ar, :, seg + i + 1, :] += g
        J[ar, :, seg + i, :] -= g
    return pts, tangent, J


def evaluate(ctrl: ArrayLike, seg: ArrayLike, lam: ArrayLike) -> NDArray[np.float64]:
    """Curve points at segment indices ``seg`` and local parameters ``lam``."""
    c = _as_ctrl(ctrl)
    Q = phantom_matrix(len(c)) @ c
    d, dd = _knots(Q)
    seg = np.atleast_1d(np.asarray(seg, dtype=np.int64))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return _eval_segments(Q, d, dd, seg, lam, False)[0]


def menger_curvature(p1: ArrayLike, p2: ArrayLike, p3: ArrayLike, want_grad: bool = False):
    """Signed curvature of the circle through three points (vectorised).

    Returns ``kappa`` or ``(kappa, dk_dp1, dk_dp2, dk_dp3)``. Degenerate
    triplets (a side shorter than ``CURVATURE_EPS``) give zero with zero
    gradient.
    """
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    u = p2 - p1
    w = p3 - p2
    z = p3 - p1
    lu = np.hypot(u[..., 0], u[..., 1])
    lw = np.hypot(w[..., 0], w[..., 1])
    lz = np.hypot(z[..., 0], z[..., 1])
    cross = u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0]
    denom = lu * lw * lz
    ok = (lu > CURVATURE_EPS) & (lw > CURVATURE_EPS) & (lz > CURVATURE_EPS)
    safe = np.where(ok, denom, 1.0)
    k = np.where(ok, 2.0 * cross / safe, 0.0)
    if not want_grad:
        return k
    lu2 = np.where(ok, lu * lu, 1.0)[..., None]
    lw2 = np.where(ok, lw * lw, 1.0)[..., None]
    lz2 = np.where(ok, lz * lz, 1.0)[..., None]
    kk = k[..., None]
    two_over = (2.0 / safe)[..., None]
    dcross_du = np.stack([w[..., 1], -w[..., 0]], axis=-1)
    dcross_dw = np.stack([-u[..., 1], u[..., 0]], axis=-1)
    # z = u + w, so its norm feeds both partials.
    dk_du = two_over * dcross_du - kk * u / lu2 - kk * z / lz2
    dk_dw = two_over * dcross_dw - kk * w / lw2 - kk * z / lz2
    mask = ok[..., None]
    dk_du = np.where(mask, dk_du, 0.0)
    dk_dw = np.where(mask, dk_dw, 0.0)
    return k, -dk_du, dk_du - dk_dw, dk_dw


def curvature(p1: ArrayLike, p2: ArrayLike, p3: ArrayLike) -> float:
    """Signed Menger curvature of one triplet; zero when degenerate."""
    return float(menger_curvature(p1, p2, p3))


def path_curvatures(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Per-sample curvature; end samples copy their neighbour."""
    n = len(points)
    if n < 3:
        return np.zeros(n)
    k = menger_curvature(points[:-2], points[1:-1], points[2:])
    return np.concatenate([k[:1], k, k[-1:]])


def interpolate(ctrl: ArrayLike, n_dense: int, fine_per_segment: int = FINE_PER_SEGMENT,
                jacobian: bool = False) -> DensePath:
    """Sample the centripetal Catmull-Rom curve at ``n_dense`` arc-length-uniform points.

    With ``jacobian=True`` the returned path carries ``d points / d ctrl`` of
    shape ``(N, 2, M, 2)``.
    """
    c = _as_ctrl(ctrl)
    M = len(c)
    if n_dense < 2:
        raise ValueError("n_dense must be at least 2")
    L = phantom_matrix(M)
    Q = L @ c
    d, dd = _knots(Q)
    nseg = M - 1
    F = int(fine_per_segment)

    fine_seg = np.concatenate([np.repeat(np.arange(nseg), F), [nseg - 1]])
    fine_lam = np.concatenate([np.tile(np.arange(F) / F, nseg), [1.0]])
    fpts, _, fJ = _eval_segments(Q, d, dd, fine_seg, fine_lam, jacobian)
    fdiff = np.diff(fpts, axis=0)
    flen = np.hypot(fdiff[:, 0], fdiff[:, 1])
    S = np.concatenate([[0.0], np.cumsum(flen)])
    total = S[-1]

    frac_j = np.arange(n_dense) / (n_dense - 1)
    targets = frac_j * total
    q = np.clip(np.searchsorted(S, targets, side="right") - 1, 0, len(flen) - 1)
    lq = flen[q]
    safe_lq = np.where(lq > 0, lq, 1.0)
    t = np.where(lq > 0, (targets - S[q]) / safe_lq, 0.0)
    t = np.clip(t, 0.0, 1.0)
    seg = fine_seg[q]
    lam = fine_lam[q] + t / F
    # Pin the ends to the first/last control points exactly.
    seg[0], lam[0], t[0] = 0, 0.0, 0.0
    seg[-1], lam[-1] = nseg - 1, 1.0
    q[-1] = len(flen) - 1
    t[-1] = 1.0

    pts, tangent, pJ = _eval_segments(Q, d, dd, seg, lam, jacobian)
    pts[0] = c[0]
    pts[-1] = c[-1]
    seg_vec = np.diff(pts, axis=0)
    ds = np.hypot(seg_vec[:, 0], seg_vec[:, 1])
    kappa = path_curvatures(pts)

    J = None
    if jacobian:
        # d flen_r / dQ: (nf-1, nQ, 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(flen[:, None] > 0, fdiff / np.where(flen > 0, flen, 1.0)[:, None], 0.0)
        dflen = np.einsum("rd,rdqe->rqe", unit, fJ[1:] - fJ[:-1])
        dS = np.concatenate([np.zeros((1,) + dflen.shape[1:]), np.cumsum(dflen, axis=0)])
        dtarget = frac_j[:, None, None] * dS[-1][None]
        inner = (t > 0) & (t < 1) & (lq > 0)
        inner[0] = inner[-1] = False
        dt = np.zeros((n_dense,) + dS.shape[1:])
        sel = np.nonzero(inner)[0]
        qs = q[sel]
        dt[sel] = ((dtarget[sel] - dS[qs]) - t[sel, None, None] * dflen[qs]) / lq[sel, None, None]
        dlam = dt / F
        pJ = pJ + tangent[:, :, None, None] * dlam[:, None, :, :]
        pJ[0] = 0.0
        pJ[-1] = 0.0
        pJ[0, :, 1, :] = np.eye(2)
        pJ[-1, :, M, :] = np.eye(2)
        J = np.einsum("ndqe,qm->ndme", pJ, L)
    return DensePath(pts, ds, kappa, seg, lam, J)


@dataclass
class JacobianReport:
    max_rel_error: float
    max_abs_error: float
    endpoint_max_abs: float
    n_dense: int
    n_ctrl: int


def path_jacobian_check(ctrl: ArrayLike, n_dense: int = 64, step: float = 1e-6) -> JacobianReport:
    """Compare the analytic dense-point Jacobian to central differences.

    Only interior control points are free; the columns for the pinned end
    points are reported separately and must be zero.
    """
    c = _as_ctrl(ctrl).copy()
    M = len(c)
    J = interpolate(c, n_dense, jacobian=True).jacobian
    free = np.zeros(M, dtype=bool)
    free[1:-1] = True
    Jp = np.where(free[None, None, :, None], J, 0.0)
    fd = np.zeros_like(J)
    for m in range(1, M - 1):
        for e in range(2):
            cp = c.copy()
            cm = c.copy()
            cp[m, e] += step
            cm[m, e] -= step
            fd[:, :, m, e] = (interpolate(cp, n_dense).points - interpolate(cm, n_dense).points) / (2 * step)
    err = np.abs(Jp[:, :, 1:-1] - fd[:, :, 1:-1])
    scale = max(np.abs(fd).max(), 1e-12)
    return JacobianReport(
        max_rel_error=float(err.max() / scale) if err.size else 0.0,
        max_abs_error=float(err.max()) if err.size else 0.0,
        endpoint_max_abs=float(np.abs(Jp[:, :, [0, M - 1]]).max()),
        n_dense=n_dense,
        n_ctrl=M,
    )
