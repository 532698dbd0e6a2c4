"""Feature computation split into tile-sized kernels.

Two decompositions exist.  The five-kernel one keeps the Jacobian inside
``cov2D`` and the view direction inside ``color``; the seven-kernel one pulls
both out into their own ``Jacobian`` and ``dir_vec`` kernels so the pipeline
stages are better balanced.  Every kernel has a scalar body (no lane ops) and
a vectorized body that uses :class:`LaneVector` for its dot products.

Each stage declares the payload fields it consumes and produces.  The task
graph builder derives inter-tile byte volumes from these declarations and
from :data:`FIELD_BYTES`, so the functional model and the timing model
describe the same dataflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lanes import LaneVector, OpCounter
from .ops import (
    Z_EPS,
    compute_k,
    cov2d,
    cov3d_naive,
    cov3d_vectorized,
    invert_cov2d,
    jacobian,
    project,
    quat_to_rotation,
    ray_dir,
)
from .sh import sh_basis, sh_color, sh_color_vectorized
from .types import CameraParams, Cov2D, Cov3D, FeatureOutput, Gaussian

# payload widths in bytes, all fields 32-bit floats
FIELD_BYTES = {
    "position": 12,
    "rotation": 16,
    "scale": 12,
    "sh": 192,
    "opacity": 4,
    "p_c": 12,
    "u": 8,
    "depth": 4,
    "flags": 4,
    "J": 24,
    "K": 24,
    "cov3d": 24,
    "cov2d": 12,
    "conic": 12,
    "det": 4,
    "dir": 12,
    "basis": 64,
    "color": 12,
}
RECORD_FIELDS = ("position", "rotation", "scale", "sh", "opacity")
SINK_FIELDS = ("u", "depth", "cov2d", "conic", "det", "color", "opacity", "flags")

CULLED = 1
DEGENERATE = 2


@dataclass
class StageContext:
    cam: CameraParams
    vectorized: bool = True
    dtype: type = np.float64
    dilation: float = 0.0
    color_offset: bool = True
    counter: OpCounter | None = None


@dataclass(frozen=True)
class StageSpec:
    name: str
    consumes: tuple
    produces: tuple
    fn: Callable = field(repr=False, compare=False)


def _lanes(values, ctx: StageContext) -> LaneVector:
    return LaneVector(values, dtype=ctx.dtype, counter=ctx.counter)


def _broadcast(value: float, ctx: StageContext) -> LaneVector:
    # scalar operand of a vector multiply; the hardware broadcasts it for free
    return LaneVector([value] * 3, dtype=ctx.dtype, counter=ctx.counter)


def _project_vectorized(p_w, ctx: StageContext):
    cam = ctx.cam
    p = _lanes(p_w, ctx)
    p_c = np.array([_lanes(row, ctx).mul(p).reduce_add() for row in cam.rotation_cw], dtype=np.float64)
    p_c = p_c + cam.translation_cw
    culled = bool(p_c[2] <= 0.0)
    inv_z = 1.0 / max(float(p_c[2]), Z_EPS)
    u = np.array(
        [
            cam.focal[0] * (p_c[0] * inv_z) + cam.principal[0],
            cam.focal[1] * (p_c[1] * inv_z) + cam.principal[1],
        ]
    )
    if ctx.counter is not None:
        ctx.counter.add_scalar("add", 3 + 2)
        ctx.counter.add_scalar("cmp")
        ctx.counter.add_scalar("div")
        ctx.counter.add_scalar("mul", 4)
    return u, p_c, culled


def _compute_k_vectorized(J, ctx: StageContext) -> np.ndarray:
    R = [_lanes(row, ctx) for row in ctx.cam.rotation_cw]
    K = np.zeros((2, 3))
    for i in range(2):
        acc = _broadcast(J[i, 0], ctx).mul(R[0])
        acc = acc.mac(_broadcast(J[i, 1], ctx), R[1])
        acc = acc.mac(_broadcast(J[i, 2], ctx), R[2])
        K[i] = acc.values()
    return K


def _cov2d_vectorized(K, cov3: Cov3D, ctx: StageContext) -> Cov2D:
    sigma = [_lanes(row, ctx) for row in cov3.matrix()]
    k = [_lanes(K[0], ctx), _lanes(K[1], ctx)]
    # T_j = Sigma k_j, built as a combination of Sigma's (symmetric) rows
    T = []
    for j in range(2):
        acc = _broadcast(K[j, 0], ctx).mul(sigma[0])
        acc = acc.mac(_broadcast(K[j, 1], ctx), sigma[1])
        acc = acc.mac(_broadcast(K[j, 2], ctx), sigma[2])
        T.append(acc)
    a = float(k[0].mul(T[0]).reduce_add()) + ctx.dilation
    b = float(k[0].mul(T[1]).reduce_add())
    c = float(k[1].mul(T[1]).reduce_add()) + ctx.dilation
    if ctx.dilation and ctx.counter is not None:
        ctx.counter.add_scalar("add", 2)
    return Cov2D(a, b, c)


# -- stage bodies ----------------------------------------------------------


def stage_projection(state: dict, ctx: StageContext) -> None:
    if ctx.vectorized:
        u, p_c, culled = _project_vectorized(state["position"], ctx)
    else:
        u, p_c, culled = project(state["position"], ctx.cam, counter=ctx.counter)
    state["u"] = u
    state["p_c"] = p_c
    state["depth"] = float(p_c[2])
    state["flags"] = CULLED if culled else 0


def stage_jacobian(state: dict, ctx: StageContext) -> None:
    state["J"] = jacobian(state["p_c"], ctx.cam.focal, counter=ctx.counter)


def stage_cov3d(state: dict, ctx: StageContext) -> None:
    # rotation arrives normalized from ingest
    R = quat_to_rotation(state["rotation"], normalize=False, counter=ctx.counter)
    if ctx.vectorized:
        r1, r2, r3 = (_lanes(row, ctx) for row in R)
        state["cov3d"] = cov3d_vectorized(r1, r2, r3, _lanes(state["scale"], ctx))
    else:
        state["cov3d"] = cov3d_naive(R, state["scale"], counter=ctx.counter)


def _cov2d_from_j(J, state: dict, ctx: StageContext) -> None:
    if ctx.vectorized:
        K = _compute_k_vectorized(J, ctx)
        state["cov2d"] = _cov2d_vectorized(K, state["cov3d"], ctx)
    else:
        K = compute_k(J, ctx.cam.rotation_cw, counter=ctx.counter)
        state["cov2d"] = cov2d(K, state["cov3d"], dilation=ctx.dilation, counter=ctx.counter)


def stage_cov2d_partitioned(state: dict, ctx: StageContext) -> None:
    _cov2d_from_j(state["J"], state, ctx)


def stage_cov2d_naive(state: dict, ctx: StageContext) -> None:
    J = jacobian(state["p_c"], ctx.cam.focal, counter=ctx.counter)
    _cov2d_from_j(J, state, ctx)


def stage_cov2d_inv(state: dict, ctx: StageContext) -> None:
    cov = invert_cov2d(state["cov2d"], counter=ctx.counter)
    state["conic"] = cov.conic
    state["det"] = cov.det
    if cov.degenerate:
        state["flags"] |= DEGENERATE


def stage_dir_vec(state: dict, ctx: StageContext) -> None:
    direction, degenerate = ray_dir(state["position"], ctx.cam.position_w, counter=ctx.counter)
    state["dir"] = direction
    if degenerate:
        state["flags"] |= DEGENERATE


def _color(direction, state: dict, ctx: StageContext) -> None:
    basis = sh_basis(direction, counter=ctx.counter)
    if ctx.vectorized:
        state["color"] = sh_color_vectorized(
            state["sh"], basis, offset=ctx.color_offset, counter=ctx.counter, dtype=ctx.dtype
        )
    else:
        state["color"] = sh_color(state["sh"], basis, offset=ctx.color_offset, counter=ctx.counter)


def stage_color_partitioned(state: dict, ctx: StageContext) -> None:
    _color(state["dir"], state, ctx)


def stage_color_naive(state: dict, ctx: StageContext) -> None:
    stage_dir_vec(state, ctx)
    _color(state.pop("dir"), state, ctx)


PROJECTION = StageSpec("projection", ("position",), ("p_c", "u", "depth", "flags"), stage_projection)
COV3D = StageSpec("cov3D", ("rotation", "scale"), ("cov3d",), stage_cov3d)
COV2D_INV = StageSpec("cov2D_inv", ("cov2d", "flags"), ("conic", "det", "flags"), stage_cov2d_inv)

NAIVE_STAGES = (
    PROJECTION,
    COV3D,
    StageSpec("cov2D", ("p_c", "cov3d"), ("cov2d",), stage_cov2d_naive),
    COV2D_INV,
    StageSpec("color", ("position", "sh", "flags"), ("color", "flags"), stage_color_naive),
)

PARTITIONED_STAGES = (
    PROJECTION,
    StageSpec("Jacobian", ("p_c",), ("J",), stage_jacobian),
    COV3D,
    StageSpec("cov2D", ("J", "cov3d"), ("cov2d",), stage_cov2d_partitioned),
    COV2D_INV,
    StageSpec("dir_vec", ("position", "flags"), ("dir", "flags"), stage_dir_vec),
    StageSpec("color", ("sh", "dir"), ("color",), stage_color_partitioned),
)


def stages(partitioned: bool) -> tuple:
    return PARTITIONED_STAGES if partitioned else NAIVE_STAGES


def initial_state(g: Gaussian) -> dict:
    return {
        "position": g.position,
        "rotation": g.rotation,
        "scale": g.scale,
        "sh": g.sh,
        "opacity": g.opacity,
    }


def run_staged(
    g: Gaussian,
    cam: CameraParams,
    *,
    partitioned: bool = True,
    vectorized: bool = True,
    dtype=np.float64,
    dilation: float = 0.0,
    color_offset: bool = True,
    counters: dict | None = None,
) -> FeatureOutput:
    """Push one Gaussian through the kernel chain, kernel by kernel.

    When ``counters`` is a dict, it is filled with one :class:`OpCounter`
    per kernel name.
    """
    state = initial_state(g)
    for spec in stages(partitioned):
        counter = None
        if counters is not None:
            counter = counters.setdefault(spec.name, OpCounter())
        ctx = StageContext(cam, vectorized, dtype, dilation, color_offset, counter)
        spec.fn(state, ctx)
    cov = state["cov2d"]
    flags = state["flags"]
    return FeatureOutput(
        u=state["u"],
        depth=state["depth"],
        cov2d=Cov2D(cov.a, cov.b, cov.c, tuple(state["conic"]), state["det"], bool(flags & DEGENERATE)),
        color=state["color"],
        opacity=state["opacity"],
        culled=bool(flags & CULLED),
        degenerate=bool(flags & DEGENERATE),
    )


def reference_gaussian() -> Gaussian:
    """A fixed, well-conditioned Gaussian used for op-count instrumentation."""
    sh = np.linspace(-0.5, 0.5, 48)
    return Gaussian((0.5, -0.25, 1.0), (0.9, 0.1, -0.3, 0.2), (0.2, 0.05, 0.1), sh, 0.8)


def reference_camera() -> CameraParams:
    return CameraParams(np.eye(3), (0.0, 0.0, 30.0), (800.0, 800.0), (640.0, 360.0))


def stage_op_counts(partitioned: bool, vectorized: bool) -> dict:
    """Per-kernel op counts from one instrumented run on the reference Gaussian."""
    counters: dict = {}
    run_staged(
        reference_gaussian(),
        reference_camera(),
        partitioned=partitioned,
        vectorized=vectorized,
        counters=counters,
    )
    return counters
