import numpy as np
import pytest

from qpservo.se3 import Pose, Twist, pose_error_twist, rotation_about, rotation_log


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return rotation_about(axis, rng.uniform(-np.pi, np.pi))


def random_pose(rng):
    return Pose(random_rotation(rng), rng.normal(size=3))


class TestPose:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) + 1e-6, np.zeros(3))

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            Pose(R, np.zeros(3))

    def test_compose_inverse(self, rng):
        for _ in range(20):
            a = random_pose(rng)
            b = a @ a.inverse()
            assert np.allclose(b.rotation, np.eye(3), atol=1e-12)
            assert np.allclose(b.translation, 0.0, atol=1e-12)

    def test_transform_point(self):
        p = Pose.from_rpy([1.0, 0.0, 0.0], (0.0, 0.0, np.pi / 2))
        out = p.transform_point([1.0, 0.0, 0.0])
        assert np.allclose(out, [1.0, 1.0, 0.0])


class TestRotationLog:
    def test_identity(self):
        assert np.allclose(rotation_log(np.eye(3)), 0.0)

    def test_round_trip(self, rng):
        for _ in range(100):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(-np.pi + 1e-3, np.pi - 1e-3)
            w = rotation_log(rotation_about(axis, angle))
            assert np.allclose(w, angle * axis, atol=1e-9)

    def test_small_angles(self, rng):
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(1e-12, 1e-6)
            w = rotation_log(rotation_about(axis, angle))
            assert np.allclose(w, angle * axis, atol=1e-12)

    def test_pi_rotation_deterministic(self):
        # exactly pi about x: axis sign convention picks +x
        R = rotation_about(np.array([1.0, 0.0, 0.0]), np.pi)
        w = rotation_log(R)
        assert np.allclose(w, [np.pi, 0.0, 0.0], atol=1e-7)
        # and the map still inverts the rotation
        R2 = rotation_about(np.array([0.57735027, 0.57735027, 0.57735027]), np.pi)
        w2 = rotation_log(R2)
        assert np.allclose(rotation_about(w2 / np.linalg.norm(w2), np.linalg.norm(w2)), R2, atol=1e-6)


class TestTwist:
    def test_array_round_trip(self):
        t = Twist.from_array(np.arange(6.0))
        assert np.allclose(t.as_array(), np.arange(6.0))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Twist(np.array([np.nan, 0.0, 0.0]), np.zeros(3))


class TestPoseErrorTwist:
    def test_identical_poses_zero(self, rng):
        for _ in range(100):
            a = random_pose(rng)
            assert pose_error_twist(a, a).norm() == pytest.approx(0.0, abs=1e-12)

    def test_pure_translation(self, rng):
        a = random_pose(rng)
        b = Pose(a.rotation, a.translation + np.array([0.1, 0.0, 0.0]))
        e = pose_error_twist(a, b)
        assert np.allclose(e.v, [0.1, 0.0, 0.0])
        assert np.allclose(e.omega, 0.0)

    def test_pure_rotation_about_z(self):
        a = Pose.identity()
        b = Pose.from_rpy([0.0, 0.0, 0.0], (0.0, 0.0, 0.3))
        e = pose_error_twist(a, b)
        assert np.allclose(e.v, 0.0)
        assert np.allclose(e.omega, [0.0, 0.0, 0.3], atol=1e-12)

    def test_base_frame_convention(self, rng):
        # rotating the current EE frame must not change how a base-frame
        # translation offset appears in the error
        for _ in range(20):
            a = random_pose(rng)
            offset = rng.normal(size=3) * 0.1
            b = Pose(a.rotation, a.translation + offset)
            assert np.allclose(pose_error_twist(a, b).v, offset, atol=1e-12)

    def test_antisymmetric_for_small_displacements(self, rng):
        # first-order antisymmetry when swapping arguments
        for _ in range(100):
            a = random_pose(rng)
            d = 1e-4
            wiggle = rng.normal(size=3)
            wiggle *= d / np.linalg.norm(wiggle)
            b = Pose(rotation_about(wiggle / d, d) @ a.rotation, a.translation + wiggle)
            fwd = pose_error_twist(a, b).as_array()
            bwd = pose_error_twist(b, a).as_array()
            assert np.max(np.abs(fwd + bwd)) < 1e-6
