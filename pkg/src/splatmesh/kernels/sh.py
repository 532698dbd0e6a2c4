"""Real spherical harmonics through degree 3 and view-dependent color.

Basis ordering is ``(l, m)`` with ``m`` running ``-l..l``; the constants are
the usual real-SH normalizations with the Condon-Shortley phase folded in,
which is what trained splat scenes expect.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .lanes import LaneVector, OpCounter
from .types import N_SH, N_SH_COEFFS, ShBasis

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)

COLOR_OFFSET = 0.5
UNIT_TOL = 1e-4


def sh_index(coeff: int, channel: int) -> int:
    """Position of SH coefficient ``coeff`` for color ``channel`` in a 48-vector."""
    return 3 * coeff + channel


def sh_basis(r, counter: OpCounter | None = None) -> ShBasis:
    r = np.asarray(r, dtype=np.float64).reshape(3)
    if abs(float(np.sqrt(r @ r)) - 1.0) > UNIT_TOL:
        raise InvalidInputError("sh_basis needs a unit direction")
    x, y, z = (float(v) for v in r)
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    vals = np.array(
        [
            SH_C0,
            -SH_C1 * y,
            SH_C1 * z,
            -SH_C1 * x,
            SH_C2[0] * xy,
            SH_C2[1] * yz,
            SH_C2[2] * (2.0 * zz - xx - yy),
            SH_C2[3] * xz,
            SH_C2[4] * (xx - yy),
            SH_C3[0] * y * (3.0 * xx - yy),
            SH_C3[1] * xy * z,
            SH_C3[2] * y * (4.0 * zz - xx - yy),
            SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
            SH_C3[4] * x * (4.0 * zz - xx - yy),
            SH_C3[5] * z * (xx - yy),
            SH_C3[6] * x * (xx - 3.0 * yy),
        ]
    )
    if counter is not None:
        # tallied term by term from the expressions above
        counter.add_scalar("mul", 6 + 3 + 1 + 1 + 2 + 1 + 1 + 3 + 2 + 3 + 5 + 3 + 2 + 3)
        counter.add_scalar("add", 2 + 1 + 1 + 2 + 2 + 2 + 1 + 1)
    return ShBasis(vals)


def sh_color(sh, basis: ShBasis, *, offset: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """Scalar color evaluation: per channel, a 16-term dot product.

    With ``offset`` the result gets ``+0.5`` and is clamped at zero.
    """
    sh = np.asarray(sh, dtype=np.float64).reshape(N_SH)
    b = basis.values
    color = np.zeros(3)
    for k in range(3):
        acc = 0.0
        for i in range(N_SH_COEFFS):
            acc += sh[sh_index(i, k)] * b[i]
        color[k] = acc
    if counter is not None:
        counter.add_scalar("mac", N_SH)
    return _finish_color(color, offset, counter)


def sh_color_vectorized(
    sh, basis: ShBasis, *, offset: bool = True, counter: OpCounter | None = None, dtype=np.float32
) -> np.ndarray:
    """Lane form: each channel's 16 coefficients as two 8-lane registers."""
    sh = np.asarray(sh, dtype=np.float64).reshape(N_SH_COEFFS, 3)
    b = np.asarray(basis.values)
    b_lo = LaneVector(b[:8], dtype=dtype, counter=counter)
    b_hi = LaneVector(b[8:], dtype=dtype, counter=counter)
    color = np.zeros(3)
    for k in range(3):
        c_lo = LaneVector(sh[:8, k], dtype=dtype, counter=counter)
        c_hi = LaneVector(sh[8:, k], dtype=dtype, counter=counter)
        acc = c_lo.mul(b_lo).mac(c_hi, b_hi)
        color[k] = acc.reduce_add()
    return _finish_color(color, offset, counter)


def _finish_color(color: np.ndarray, offset: bool, counter: OpCounter | None) -> np.ndarray:
    if not offset:
        return color
    if counter is not None:
        counter.add_scalar("add", 3)
        counter.add_scalar("cmp", 3)
    return np.maximum(color + COLOR_OFFSET, 0.0)
