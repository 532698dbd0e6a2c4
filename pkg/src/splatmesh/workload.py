"""Gaussian workloads: the ``GSFC`` binary format, random generation, cameras.

File layout (all little-endian)::

    offset  size  field
    0       4     magic b"GSFC"
    4       2     format version (1)
    6       8     record count
    14      2     flags (reserved, 0)
    16      236*n records: position f32[3], rotation f32[4] (w, x, y, z),
                  scale f32[3], sh f32[48] (index 3*coeff + channel), opacity f32

Records are stored exactly as written; quaternions are normalized only when
a record is turned into a :class:`~splatmesh.kernels.types.Gaussian`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .kernels.sh import sh_index
from .kernels.types import RECORD_BYTES, CameraParams, Gaussian

MAGIC = b"GSFC"
VERSION = 1
HEADER = struct.Struct("<4sHQH")

RECORD_DTYPE = np.dtype(
    [
        ("position", "<f4", (3,)),
        ("rotation", "<f4", (4,)),
        ("scale", "<f4", (3,)),
        ("sh", "<f4", (48,)),
        ("opacity", "<f4"),
    ]
)
assert RECORD_DTYPE.itemsize == RECORD_BYTES


@dataclass
class GaussianFile:
    records: np.ndarray
    version: int = VERSION
    flags: int = 0

    def __post_init__(self):
        self.records = np.ascontiguousarray(self.records, dtype=RECORD_DTYPE)

    @property
    def count(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return self.count

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian.from_record(self.records[i])

    def to_bytes(self) -> bytes:
        return HEADER.pack(MAGIC, self.version, self.count, self.flags) + self.records.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GaussianFile":
        if len(data) < HEADER.size:
            raise ParseError(f"header needs {HEADER.size} bytes, file has {len(data)}", len(data))
        magic, version, count, flags = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
        if version != VERSION:
            raise ParseError(f"unsupported format version {version}", 4)
        expected = count * RECORD_BYTES
        actual = len(data) - HEADER.size
        if actual != expected:
            raise ParseError(
                f"payload for {count} records must be {expected} bytes, found {actual}",
                HEADER.size + min(actual, expected),
            )
        records = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER.size)
        return cls(records.copy(), version, flags)

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "GaussianFile":
        return cls.from_bytes(Path(path).read_bytes())


def generate(count: int, seed: int = 0) -> GaussianFile:
    """Random, well-conditioned Gaussians; identical output for identical seeds.

    Positions are uniform in [-10, 10]^3, rotations uniform on the unit
    3-sphere, scales log-uniform in [0.01, 1], SH coefficients N(0, 0.5)
    with the degree-0 terms shifted by +0.5, opacity uniform in (0, 1].
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    rng = np.random.default_rng(seed)
    rec = np.zeros(count, dtype=RECORD_DTYPE)
    rec["position"] = rng.uniform(-10.0, 10.0, size=(count, 3))
    q = rng.normal(size=(count, 4))
    rec["rotation"] = q / np.linalg.norm(q, axis=1, keepdims=True)
    rec["scale"] = 10.0 ** rng.uniform(-2.0, 0.0, size=(count, 3))
    sh = rng.normal(0.0, 0.5, size=(count, 48))
    sh[:, [sh_index(0, k) for k in range(3)]] += 0.5
    rec["sh"] = sh
    rec["opacity"] = 1.0 - rng.random(count)
    return GaussianFile(rec)


def default_camera() -> CameraParams:
    """Axis-aligned camera 30 units behind the origin; sees all of [-10, 10]^3 in front of it."""
    return CameraParams(np.eye(3), (0.0, 0.0, 30.0), (800.0, 800.0), (640.0, 360.0))


def load_camera(path) -> CameraParams:
    return CameraParams.from_dict(json.loads(Path(path).read_text()))


def save_camera(cam: CameraParams, path) -> None:
    Path(path).write_text(json.dumps(cam.to_dict(), indent=2))


def records_from_ply_properties(props: dict) -> GaussianFile:
    """Convert vertex properties of a trained-scene PLY export into records.

    PLY parsing is left to the caller (e.g. the ``plyfile`` package); pass a
    mapping from property name to 1-D array.  The mapping follows the usual
    trained-splat export conventions:

    * ``x, y, z`` -> position
    * ``rot_0..rot_3`` -> rotation, already scalar-first
    * ``scale_0..scale_2`` hold log-scales -> ``exp`` applied
    * ``f_dc_0..2`` are the degree-0 coefficients per channel
    * ``f_rest_0..44`` are channel-major (all 15 higher coefficients of red,
      then green, then blue) -> re-interleaved to ``3 * coeff + channel``
    * ``opacity`` holds a logit -> sigmoid applied
    """
    n = len(props["x"])
    rec = np.zeros(n, dtype=RECORD_DTYPE)
    rec["position"] = np.stack([props[k] for k in ("x", "y", "z")], axis=1)
    rec["rotation"] = np.stack([props[f"rot_{i}"] for i in range(4)], axis=1)
    rec["scale"] = np.exp(np.stack([props[f"scale_{i}"] for i in range(3)], axis=1))
    sh = np.zeros((n, 48))
    for k in range(3):
        sh[:, sh_index(0, k)] = props[f"f_dc_{k}"]
        for i in range(1, 16):
            sh[:, sh_index(i, k)] = props[f"f_rest_{k * 15 + i - 1}"]
    rec["sh"] = sh
    rec["opacity"] = 1.0 / (1.0 + np.exp(-np.asarray(props["opacity"], dtype=np.float64)))
    return GaussianFile(rec)
