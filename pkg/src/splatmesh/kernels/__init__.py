"""Per-Gaussian feature computation: scalar oracle, lane-vectorized forms, staged kernels."""

from .lanes import LANES, LaneVector, OpCounter
from .ops import (
    Projection,
    RayDirection,
    compute_features,
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
from .sh import sh_basis, sh_color, sh_color_vectorized, sh_index
from .staged import (
    FIELD_BYTES,
    NAIVE_STAGES,
    PARTITIONED_STAGES,
    run_staged,
    stage_op_counts,
    stages,
)
from .types import (
    RECORD_BYTES,
    CameraParams,
    Cov2D,
    Cov3D,
    FeatureOutput,
    Gaussian,
    ShBasis,
)
