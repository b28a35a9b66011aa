"""Rigid-body poses and spatial twists.

Rotations are plain 3x3 orthonormal numpy arrays; poses pair a rotation with
a translation. Everything here is an immutable value object so poses can be
shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative rotation angles closer to pi than this go through the
# diagonal-extraction branch of the matrix logarithm.
_NEAR_PI = 1e-6


def hat(v: np.ndarray) -> np.ndarray:
    """3x3 cross-product matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = hat(np.asarray(axis, dtype=float))
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rpy_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation from roll-pitch-yaw: Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    rx = rotation_about(np.array([1.0, 0.0, 0.0]), roll)
    ry = rotation_about(np.array([0.0, 1.0, 0.0]), pitch)
    rz = rotation_about(np.array([0.0, 0.0, 1.0]), yaw)
    return rz @ ry @ rx


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Angle-axis vector (angle * unit axis) of a rotation matrix.

    At exactly pi the axis sign is undefined; we resolve it
    deterministically: the axis is extracted from the diagonal of
    (R + I)/2 and signed so that its first nonzero component (in x, y, z
    order) is positive.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    skew = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])

    if np.pi - theta > _NEAR_PI:
        if theta < 1e-7:
            # sin(theta)/theta ~ 1; skew already equals sin(theta) * axis
            return skew
        return (theta / np.sin(theta)) * skew

    # theta ~ pi: axis from the diagonal, sign convention documented above
    B = 0.5 * (R + np.eye(3))
    axis = np.sqrt(np.clip(np.diag(B), 0.0, None))
    if axis[0] > 1e-6:
        axis[1] = np.copysign(axis[1], B[0, 1])
        axis[2] = np.copysign(axis[2], B[0, 2])
    elif axis[1] > 1e-6:
        axis[2] = np.copysign(axis[2], B[1, 2])
    norm = np.linalg.norm(axis)
    if norm > 0.0:
        axis = axis / norm
    return theta * axis


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (3x3, orthonormal, det +1) + translation (m)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("Pose needs a 3x3 rotation and a 3-vector translation")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def _trusted(cls, rotation: np.ndarray, translation: np.ndarray) -> "Pose":
        """Skip validation for products of already-validated poses (the
        group operations preserve orthonormality to machine precision)."""
        obj = object.__new__(cls)
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(obj, "rotation", rotation)
        object.__setattr__(obj, "translation", translation)
        return obj

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_rpy(translation, rpy=(0.0, 0.0, 0.0)) -> "Pose":
        return Pose(rpy_to_rotation(*rpy), np.asarray(translation, dtype=float))

    def compose(self, other: "Pose") -> "Pose":
        return Pose._trusted(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        RT = self.rotation.T.copy()
        return Pose._trusted(RT, -(RT @ self.translation))

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation


@dataclass(frozen=True)
class Twist:
    """Spatial velocity: linear v (m/s) and angular omega (rad/s)."""

    v: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        v = _frozen(self.v)
        w = _frozen(self.omega)
        if v.shape != (3,) or w.shape != (3,):
            raise ValueError("Twist needs two 3-vectors")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("Twist entries must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "omega", w)

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(a: np.ndarray) -> "Twist":
        a = np.asarray(a, dtype=float)
        if a.shape != (6,):
            raise ValueError("expected a 6-vector (vx vy vz wx wy wz)")
        return Twist(a[:3], a[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.v, self.omega])

    def scaled(self, gain: float) -> "Twist":
        return Twist(gain * self.v, gain * self.omega)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def pose_error_twist(current: Pose, desired: Pose) -> Twist:
    """Base-frame twist taking `current` toward `desired`.

    Linear part is the plain position difference; angular part is the
    angle-axis vector of the relative rotation, rotated into the base frame
    so the result composes with a base-frame Jacobian. Zero iff the poses
    coincide.
    """
    v = desired.translation - current.translation
    omega_body = rotation_log(current.rotation.T @ desired.rotation)
    return Twist(v, current.rotation @ omega_body)
