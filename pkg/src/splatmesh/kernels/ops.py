"""Scalar reference implementations of the per-Gaussian feature math.

These functions are the oracle every other path is checked against.  They
take an optional :class:`OpCounter` and, when given one, tally the scalar
operations a straightforward single-issue implementation would execute.
Counting never changes the arithmetic.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import InvalidInputError
from .lanes import LaneVector, OpCounter
from .sh import sh_basis, sh_color
from .types import CameraParams, Cov2D, Cov3D, FeatureOutput, Gaussian

Z_EPS = 1e-6
DET_EPS = 1e-9
RAY_EPS = 1e-9


class Projection(NamedTuple):
    u: np.ndarray
    p_c: np.ndarray
    culled: bool


class RayDirection(NamedTuple):
    direction: np.ndarray
    degenerate: bool


def quat_to_rotation(q, *, normalize: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """Rotation matrix of a scalar-first ``(w, x, y, z)`` quaternion."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n2 = float(q @ q)
    if n2 <= 1e-24:
        raise InvalidInputError("zero-norm quaternion")
    if normalize:
        q = q / np.sqrt(n2)
        if counter is not None:
            counter.add_scalar("mac", 4)
            counter.add_scalar("sqrt")
            counter.add_scalar("div", 4)
    w, x, y, z = (float(v) for v in q)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    R = np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )
    if counter is not None:
        counter.add_scalar("mul", 9 + 9)
        counter.add_scalar("add", 9 + 3)
    return R


def cov3d_naive(R, s, counter: OpCounter | None = None) -> Cov3D:
    """``R diag(s^2) R^T`` via two literal 3x3x3 loops (temp = R S, then temp R^T)."""
    R = np.asarray(R, dtype=np.float64).reshape(9).tolist()
    s = np.asarray(s, dtype=np.float64).reshape(3).tolist()
    if min(s) <= 0:
        raise InvalidInputError("scale components must be positive")
    S = [0.0] * 9
    for i in range(3):
        S[i * 3 + i] = s[i] * s[i]
    temp = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += R[i * 3 + k] * S[k * 3 + j]
            temp[i * 3 + j] = acc
    cov = [0.0] * 9
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += temp[i * 3 + k] * R[j * 3 + k]
            cov[i * 3 + j] = acc
    if counter is not None:
        counter.add_scalar("mul", 3)
        counter.add_scalar("mac", 2 * 27)
    return Cov3D(cov[0], cov[1], cov[2], cov[4], cov[5], cov[8])


def cov3d_vectorized(r1: LaneVector, r2: LaneVector, r3: LaneVector, s: LaneVector) -> Cov3D:
    """Upper triangle of ``R diag(s^2) R^T`` as ``r_i . (r_j * s^2)`` lane products.

    ``r1..r3`` are the rows of R and ``s`` the per-axis scale, each in lanes
    0..2 with zero padding.  Nonzero padding would leak into the horizontal
    reductions, so it is rejected.
    """
    for name, v in (("r1", r1), ("r2", r2), ("r3", r3), ("s", s)):
        if v.size != 3 or not v.padding_is_zero():
            raise InvalidInputError(f"{name} must hold 3 populated lanes with zero padding")
    s2 = s.mul(s)
    rows = (r1, r2, r3)
    out = []
    for i, j in ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)):
        out.append(s2.mul(rows[i]).mul(rows[j]).reduce_add())
    return Cov3D(*(float(v) for v in out))


def project(p_w, cam: CameraParams, counter: OpCounter | None = None) -> Projection:
    """Pinhole projection; ``culled`` is set when the point is not in front of the camera."""
    p_w = np.asarray(p_w, dtype=np.float64).reshape(3)
    p_c = cam.rotation_cw @ p_w + cam.translation_cw
    culled = bool(p_c[2] <= 0.0)
    z = max(float(p_c[2]), Z_EPS)
    inv_z = 1.0 / z
    fx, fy = cam.focal
    cx, cy = cam.principal
    u = np.array([fx * (p_c[0] * inv_z) + cx, fy * (p_c[1] * inv_z) + cy])
    if counter is not None:
        counter.add_scalar("mac", 9)
        counter.add_scalar("add", 3 + 2)
        counter.add_scalar("cmp")
        counter.add_scalar("div")
        counter.add_scalar("mul", 4)
    return Projection(u, p_c, culled)


def jacobian(p_c, focal, counter: OpCounter | None = None) -> np.ndarray:
    """First-order perspective Jacobian of the pixel position w.r.t. camera coordinates."""
    x, y, z = (float(v) for v in np.asarray(p_c, dtype=np.float64).reshape(3))
    z = max(z, Z_EPS)
    fx, fy = (float(v) for v in np.asarray(focal).reshape(2))
    inv_z = 1.0 / z
    inv_z2 = inv_z * inv_z
    J = np.array(
        [
            [fx * inv_z, 0.0, -(fx * x) * inv_z2],
            [0.0, fy * inv_z, -(fy * y) * inv_z2],
        ]
    )
    if counter is not None:
        counter.add_scalar("cmp")
        counter.add_scalar("div")
        counter.add_scalar("mul", 7)
    return J


def compute_k(J, R_cw, counter: OpCounter | None = None) -> np.ndarray:
    J = np.asarray(J, dtype=np.float64).reshape(2, 3)
    R_cw = np.asarray(R_cw, dtype=np.float64).reshape(3, 3)
    if counter is not None:
        counter.add_scalar("mac", 18)
    return J @ R_cw


def cov2d(K, cov3d: Cov3D, *, dilation: float = 0.0, counter: OpCounter | None = None) -> Cov2D:
    """Screen-space covariance ``K Sigma K^T``; ``dilation`` is added to the diagonal."""
    K = np.asarray(K, dtype=np.float64).reshape(2, 3)
    KS = K @ cov3d.matrix()
    a = float(KS[0] @ K[0]) + dilation
    b = float(KS[0] @ K[1])
    c = float(KS[1] @ K[1]) + dilation
    if counter is not None:
        counter.add_scalar("mac", 18 + 9)
        if dilation:
            counter.add_scalar("add", 2)
    return Cov2D(a, b, c)


def invert_cov2d(cov: Cov2D, counter: OpCounter | None = None) -> Cov2D:
    """Fill in the conic (inverse) and determinant; singular input is flagged."""
    a, b, c = cov.a, cov.b, cov.c
    det = a * c - b * b
    if counter is not None:
        counter.add_scalar("mul", 2)
        counter.add_scalar("add")
        counter.add_scalar("cmp")
    if det <= DET_EPS:
        return Cov2D(a, b, c, (0.0, 0.0, 0.0), det, True)
    inv = 1.0 / det
    if counter is not None:
        counter.add_scalar("div")
        counter.add_scalar("mul", 3)
    return Cov2D(a, b, c, (c * inv, -b * inv, a * inv), det, False)


def ray_dir(p_w, cam_pos, counter: OpCounter | None = None) -> RayDirection:
    d = np.asarray(p_w, dtype=np.float64).reshape(3) - np.asarray(cam_pos, dtype=np.float64).reshape(3)
    n = float(np.sqrt(d @ d))
    if counter is not None:
        counter.add_scalar("add", 3)
        counter.add_scalar("mac", 3)
        counter.add_scalar("sqrt")
        counter.add_scalar("cmp")
    if n <= RAY_EPS:
        return RayDirection(np.array([0.0, 0.0, 1.0]), True)
    inv = 1.0 / n
    if counter is not None:
        counter.add_scalar("div")
        counter.add_scalar("mul", 3)
    return RayDirection(d * inv, False)


def compute_features(
    g: Gaussian,
    cam: CameraParams,
    *,
    dilation: float = 0.0,
    color_offset: bool = True,
) -> FeatureOutput:
    """End-to-end scalar feature computation for one Gaussian."""
    R = quat_to_rotation(g.rotation)
    cov3 = cov3d_naive(R, g.scale)
    u, p_c, culled = project(g.position, cam)
    J = jacobian(p_c, cam.focal)
    K = compute_k(J, cam.rotation_cw)
    cov = invert_cov2d(cov2d(K, cov3, dilation=dilation))
    direction, ray_degenerate = ray_dir(g.position, cam.position_w)
    color = sh_color(g.sh, sh_basis(direction), offset=color_offset)
    return FeatureOutput(
        u=u,
        depth=float(p_c[2]),
        cov2d=cov,
        color=color,
        opacity=g.opacity,
        culled=culled,
        degenerate=cov.degenerate or ray_degenerate,
    )
