from __future__ import annotations

import math

import numpy as np
import pytest

from synergrip.units import FingertipForce, GraspType, Pose, Vec3, decompose


def sample(x, y, z, fid="thumb", t=0.0):
    return FingertipForce(fid, Vec3(x, y, z), t)


def test_decompose_no_contact_is_zero():
    f_n, f_t_vec, f_t = decompose(sample(0, 0, 0))
    assert f_n == 0.0
    assert f_t == 0.0
    assert f_t_vec == Vec3(0.0, 0.0, 0.0)


def test_decompose_press_with_shear():
    # 3-4-5 triangle in the tangential plane, 50 mN press.
    f_n, f_t_vec, f_t = decompose(sample(3, 4, -50))
    assert f_n == pytest.approx(50.0)
    assert f_t == pytest.approx(5.0)
    assert f_t_vec.z == 0.0


def test_decompose_pull_clamps_normal_to_zero():
    f_n, _, f_t = decompose(sample(0, 0, +10))
    assert f_n == 0.0
    assert f_t == 0.0


def test_decompose_rejects_non_finite():
    for bad in (float("nan"), float("inf"), -float("inf")):
        with pytest.raises(ValueError, match="rejected"):
            decompose(sample(bad, 0, 0))


def test_decompose_scales_linearly_for_presses():
    rng = np.random.default_rng(42)
    for _ in range(200):
        x, y = rng.uniform(-100, 100, 2)
        z = rng.uniform(-200, 0)
        k = rng.uniform(0.01, 10)
        f_n, _, f_t = decompose(sample(x, y, z))
        f_n_k, _, f_t_k = decompose(sample(k * x, k * y, k * z))
        assert f_n_k == pytest.approx(k * f_n, rel=1e-12)
        assert f_t_k == pytest.approx(k * f_t, rel=1e-12)


def test_tangential_magnitude_invariant_under_inplane_rotation():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x, y = rng.uniform(-100, 100, 2)
        phi = rng.uniform(0, 2 * math.pi)
        xr = x * math.cos(phi) - y * math.sin(phi)
        yr = x * math.sin(phi) + y * math.cos(phi)
        _, _, f_t = decompose(sample(x, y, -10))
        _, _, f_t_r = decompose(sample(xr, yr, -10))
        assert f_t_r == pytest.approx(f_t, rel=1e-12, abs=1e-12)


def test_pose_rejects_non_orthonormal_rotation():
    with pytest.raises(ValueError, match="orthonormal"):
        Pose([[1, 0, 0], [0, 1, 0], [0, 0, 1.1]], Vec3(0, 0, 0))


def test_pose_rejects_reflection():
    with pytest.raises(ValueError, match="proper"):
        Pose([[1, 0, 0], [0, 1, 0], [0, 0, -1]], Vec3(0, 0, 0))


def test_pose_compose_and_transform():
    rot90 = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
    a = Pose(rot90, Vec3(1, 0, 0))
    p = a.transform_point(Vec3(1, 0, 0))
    assert (p.x, p.y, p.z) == pytest.approx((1.0, 1.0, 0.0))
    b = Pose(np.eye(3), Vec3(0, 1, 0))
    ab = a.compose(b)
    # b's translation is rotated into a's frame before adding: R90*(0,1,0) = (-1,0,0).
    origin = ab.transform_point(Vec3(0, 0, 0))
    assert (origin.x, origin.y, origin.z) == pytest.approx((0.0, 0.0, 0.0))


def test_grasp_type_parse():
    assert GraspType.parse("tripod") is GraspType.TRIPOD
    assert GraspType.parse("lateral_tripod") is GraspType.LATERAL_TRIPOD
    with pytest.raises(ValueError, match="unknown grasp type"):
        GraspType.parse("fist")
