"""Value types flowing through the feature-computation kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError

N_SH_COEFFS = 16
N_SH = 3 * N_SH_COEFFS
RECORD_FLOATS = 3 + 4 + 3 + N_SH + 1
RECORD_BYTES = 4 * RECORD_FLOATS  # 236

ORTHONORMAL_TOL = 1e-5


def _vec(values, n: int, name: str, dtype=np.float32) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).reshape(-1)
    if arr.size != n:
        raise InvalidInputError(f"{name} must have {n} components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Gaussian:
    """One splat primitive.

    The rotation is a scalar-first ``(w, x, y, z)`` quaternion and is
    normalized on construction.  ``scale`` holds per-axis standard deviations.
    SH coefficients are channel-interleaved: coefficient ``i`` of channel
    ``k`` lives at ``sh[3 * i + k]``.
    """

    position: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    sh: np.ndarray
    opacity: float

    def __post_init__(self):
        pos = _vec(self.position, 3, "position")
        rot = _vec(self.rotation, 4, "rotation", dtype=np.float64)
        scale = _vec(self.scale, 3, "scale")
        sh = _vec(self.sh, N_SH, "sh")
        norm = float(np.sqrt(np.dot(rot, rot)))
        if norm <= 1e-12:
            raise InvalidInputError("rotation quaternion has zero norm")
        if np.any(scale <= 0):
            raise InvalidInputError("scale components must be strictly positive")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", (rot / norm).astype(np.float32))
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "sh", sh)
        object.__setattr__(self, "opacity", float(np.float32(self.opacity)))

    @classmethod
    def from_record(cls, record) -> "Gaussian":
        """Build from a row of :data:`splatmesh.workload.RECORD_DTYPE`."""
        return cls(
            record["position"], record["rotation"], record["scale"], record["sh"], record["opacity"]
        )


@dataclass(frozen=True, eq=False)
class CameraParams:
    """Pinhole camera: ``p_cam = rotation_cw @ p_world + translation_cw``."""

    rotation_cw: np.ndarray
    translation_cw: np.ndarray
    focal: np.ndarray
    principal: np.ndarray
    position_w: np.ndarray = field(init=False)

    def __post_init__(self):
        R = np.asarray(self.rotation_cw, dtype=np.float64)
        if R.shape != (3, 3):
            raise InvalidInputError("rotation_cw must be 3x3")
        if np.max(np.abs(R @ R.T - np.eye(3))) > ORTHONORMAL_TOL:
            raise InvalidInputError("rotation_cw is not orthonormal")
        t = _vec(self.translation_cw, 3, "translation_cw", dtype=np.float64)
        object.__setattr__(self, "rotation_cw", R)
        object.__setattr__(self, "translation_cw", t)
        object.__setattr__(self, "focal", _vec(self.focal, 2, "focal", dtype=np.float64))
        object.__setattr__(self, "principal", _vec(self.principal, 2, "principal", dtype=np.float64))
        object.__setattr__(self, "position_w", -R.T @ t)

    @classmethod
    def identity(cls, fx=1.0, fy=1.0, cx=0.0, cy=0.0) -> "CameraParams":
        return cls(np.eye(3), np.zeros(3), (fx, fy), (cx, cy))

    def to_dict(self) -> dict:
        return {
            "rotation_cw": self.rotation_cw.tolist(),
            "translation_cw": self.translation_cw.tolist(),
            "focal": self.focal.tolist(),
            "principal": self.principal.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CameraParams":
        missing = {"rotation_cw", "translation_cw", "focal", "principal"} - set(doc)
        if missing:
            raise InvalidInputError(f"camera document lacks {sorted(missing)}")
        return cls(doc["rotation_cw"], doc["translation_cw"], doc["focal"], doc["principal"])


@dataclass(frozen=True)
class Cov3D:
    """Upper triangle ``(xx, xy, xz, yy, yz, zz)`` of a symmetric 3x3 covariance."""

    xx: float
    xy: float
    xz: float
    yy: float
    yz: float
    zz: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.xx, self.xy, self.xz],
                [self.xy, self.yy, self.yz],
                [self.xz, self.yz, self.zz],
            ],
            dtype=np.float64,
        )

    def as_tuple(self) -> tuple:
        return (self.xx, self.xy, self.xz, self.yy, self.yz, self.zz)

    @classmethod
    def from_matrix(cls, m) -> "Cov3D":
        m = np.asarray(m)
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2])


@dataclass(frozen=True)
class Cov2D:
    """Symmetric 2x2 covariance ``[[a, b], [b, c]]`` plus its inverse ("conic")."""

    a: float
    b: float
    c: float
    conic: tuple = (0.0, 0.0, 0.0)
    det: float = 0.0
    degenerate: bool = False

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]], dtype=np.float64)

    def conic_matrix(self) -> np.ndarray:
        ca, cb, cc = self.conic
        return np.array([[ca, cb], [cb, cc]], dtype=np.float64)


@dataclass(frozen=True)
class ShBasis:
    """The 16 real SH basis values for degrees 0..3, in ``(l, m)`` order."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (N_SH_COEFFS,):
            raise InvalidInputError("ShBasis holds exactly 16 values")


@dataclass(frozen=True, eq=False)
class FeatureOutput:
    """Per-Gaussian result of feature computation.

    ``culled`` marks Gaussians at or behind the camera plane; ``degenerate``
    marks a singular 2D covariance or a view ray of zero length.  Flagged
    outputs still carry numbers so a pipeline stays full.
    """

    u: np.ndarray
    depth: float
    cov2d: Cov2D
    color: np.ndarray
    opacity: float = 1.0
    culled: bool = False
    degenerate: bool = False

    def fields(self) -> dict:
        """Flatten to named arrays, for comparisons and reports."""
        return {
            "u": np.asarray(self.u, dtype=np.float64),
            "depth": np.array([self.depth], dtype=np.float64),
            "cov2d": np.array([self.cov2d.a, self.cov2d.b, self.cov2d.c], dtype=np.float64),
            "conic": np.asarray(self.cov2d.conic, dtype=np.float64),
            "det": np.array([self.cov2d.det], dtype=np.float64),
            "color": np.asarray(self.color, dtype=np.float64),
        }
