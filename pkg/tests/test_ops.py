import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import dense_cov3d, fd_jacobian, sandwich_rotation

from splatmesh.errors import InvalidInputError
from splatmesh.kernels import (
    LaneVector,
    OpCounter,
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
from splatmesh.kernels.types import CameraParams, Cov2D, Cov3D, Gaussian

quats = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda q: np.linalg.norm(q) > 1e-3
)
scales = st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3)


@given(quats)
def test_rotation_matches_quaternion_sandwich(q):
    np.testing.assert_allclose(quat_to_rotation(q), sandwich_rotation(q), atol=1e-12)


@given(quats)
def test_rotation_is_orthonormal(q):
    R = quat_to_rotation(q)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_zero_quaternion_rejected():
    with pytest.raises(InvalidInputError):
        quat_to_rotation([0, 0, 0, 0])


def test_identity_quaternion():
    np.testing.assert_array_equal(quat_to_rotation([1, 0, 0, 0]), np.eye(3))


@given(quats, scales)
def test_cov3d_naive_matches_dense_product(q, s):
    R = quat_to_rotation(q)
    got = cov3d_naive(R, s).matrix()
    np.testing.assert_allclose(got, dense_cov3d(R, s), rtol=1e-12, atol=1e-15)


@given(quats, scales)
def test_cov3d_vectorized_float64_lanes_match_dense(q, s):
    R = quat_to_rotation(q)
    lanes = [LaneVector(r, dtype=np.float64) for r in R]
    got = cov3d_vectorized(*lanes, LaneVector(s, dtype=np.float64)).matrix()
    np.testing.assert_allclose(got, dense_cov3d(R, s), rtol=1e-12, atol=1e-15)


def test_cov3d_vectorized_rejects_dirty_padding():
    reg = np.zeros(8)
    reg[:3] = 1.0
    reg[6] = 5.0
    good = LaneVector([1.0, 0.0, 0.0])
    with pytest.raises(InvalidInputError):
        cov3d_vectorized(LaneVector.from_register(reg, 3), good, good, good)
    with pytest.raises(InvalidInputError):
        cov3d_vectorized(LaneVector([1.0, 0.0]), good, good, good)


def test_cov3d_naive_rejects_nonpositive_scale():
    with pytest.raises(InvalidInputError):
        cov3d_naive(np.eye(3), [1.0, 0.0, 1.0])


def test_axis_aligned_cov3d_is_diagonal_of_squares():
    c = cov3d_naive(np.eye(3), [1.0, 2.0, 3.0])
    assert c.as_tuple() == (1.0, 0.0, 0.0, 4.0, 0.0, 9.0)


def test_cov3d_op_counts():
    c = OpCounter()
    cov3d_naive(np.eye(3), [1.0, 1.0, 1.0], counter=c)
    assert c.scalar["mac"] == 54
    v = OpCounter()
    rows = [LaneVector(r, counter=v) for r in np.eye(3)]
    cov3d_vectorized(*rows, LaneVector([1.0, 1.0, 1.0], counter=v))
    assert v.vector["mul"] == 13
    assert v.vector["reduce"] == 6
    assert v.multiplies < c.multiplies


def test_project_principal_point_and_cull():
    cam = CameraParams(np.eye(3), (0.0, 0.0, 5.0), (100.0, 120.0), (320.0, 240.0))
    u, p_c, culled = project([0.0, 0.0, 0.0], cam)
    np.testing.assert_allclose(u, [320.0, 240.0])
    assert p_c[2] == 5.0 and not culled
    u, _, _ = project([1.0, -1.0, 5.0], cam)
    np.testing.assert_allclose(u, [320.0 + 10.0, 240.0 - 12.0])
    assert project([0.0, 0.0, -6.0], cam).culled
    # the depth clamp keeps u finite at z = 0
    res = project([1.0, 0.0, -5.0], cam)
    assert res.culled and np.all(np.isfinite(res.u))


@settings(max_examples=200)
@given(
    st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 50), st.floats(100, 2000), st.floats(100, 2000)
)
def test_jacobian_matches_finite_differences(x, y, z, fx, fy):
    p_c = np.array([x, y, z])
    J = jacobian(p_c, (fx, fy))
    np.testing.assert_allclose(J, fd_jacobian(p_c, (fx, fy)), rtol=1e-5, atol=1e-6 * fx)


def test_compute_k_and_cov2d_match_dense():
    rng = np.random.default_rng(3)
    R_cw = quat_to_rotation(rng.normal(size=4))
    J = rng.normal(size=(2, 3))
    S = dense_cov3d(quat_to_rotation(rng.normal(size=4)), [0.3, 0.2, 0.1])
    K = compute_k(J, R_cw)
    np.testing.assert_allclose(K, J @ R_cw)
    got = cov2d(K, Cov3D.from_matrix(S), dilation=0.3)
    np.testing.assert_allclose(got.matrix(), K @ S @ K.T + 0.3 * np.eye(2), rtol=1e-12)


def test_invert_cov2d_adjugate():
    cov = invert_cov2d(Cov2D(4.0, 1.0, 3.0))
    assert cov.det == 11.0
    np.testing.assert_allclose(cov.conic_matrix() @ cov.matrix(), np.eye(2), atol=1e-14)
    assert not cov.degenerate


def test_invert_cov2d_degenerate():
    cov = invert_cov2d(Cov2D(1.0, 1.0, 1.0))
    assert cov.degenerate
    assert cov.conic == (0.0, 0.0, 0.0)


def test_ray_dir_unit_and_fallback():
    d, degen = ray_dir([3.0, 0.0, 4.0], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(d, [0.6, 0.0, 0.8])
    assert not degen
    d, degen = ray_dir([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    assert degen
    np.testing.assert_array_equal(d, [0.0, 0.0, 1.0])


def test_camera_validation():
    with pytest.raises(InvalidInputError):
        CameraParams(np.ones((3, 3)), (0, 0, 0), (1, 1), (0, 0))
    with pytest.raises(InvalidInputError):
        CameraParams.from_dict({"focal": [1, 1]})
    cam = CameraParams(np.eye(3), (1.0, 2.0, 3.0), (1, 1), (0, 0))
    np.testing.assert_allclose(cam.position_w, [-1.0, -2.0, -3.0])
    again = CameraParams.from_dict(cam.to_dict())
    np.testing.assert_array_equal(again.translation_cw, cam.translation_cw)


def test_gaussian_validation_and_normalization():
    sh = np.zeros(48)
    g = Gaussian((0, 0, 0), (2, 0, 0, 0), (1, 1, 1), sh, 0.5)
    np.testing.assert_array_equal(g.rotation, [1, 0, 0, 0])
    with pytest.raises(InvalidInputError):
        Gaussian((0, 0, 0), (0, 0, 0, 0), (1, 1, 1), sh, 0.5)
    with pytest.raises(InvalidInputError):
        Gaussian((0, 0, 0), (1, 0, 0, 0), (1, -1, 1), sh, 0.5)
    with pytest.raises(InvalidInputError):
        Gaussian((0, 0, 0), (1, 0, 0, 0), (1, 1, 1), sh[:40], 0.5)


def test_compute_features_known_point():
    cam = CameraParams(np.eye(3), (0.0, 0.0, 10.0), (100.0, 100.0), (50.0, 50.0))
    sh = np.zeros(48)
    sh[:3] = 1.0
    g = Gaussian((0, 0, 0), (1, 0, 0, 0), (1.0, 1.0, 1.0), sh, 0.7)
    out = compute_features(g, cam)
    np.testing.assert_allclose(out.u, [50.0, 50.0])
    assert out.depth == 10.0
    # isotropic unit Gaussian at depth 10 with f = 100 spans 10 px
    np.testing.assert_allclose(out.cov2d.matrix(), 100.0 * np.eye(2))
    np.testing.assert_allclose(out.color, [0.28209479177387814 + 0.5] * 3)
    assert out.opacity == pytest.approx(0.7)
    assert not out.culled and not out.degenerate
