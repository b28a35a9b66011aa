"""Serial-link kinematics.

A robot is a flat chain of (fixed pre-transform, joint axis) pairs. Link k is
the body moved by joint k, so a point attached to link k is a function of
joints 0..k only, which keeps truncated point Jacobians trivial.

All functions are pure; models are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .se3 import Pose, hat, rotation_about

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass(frozen=True)
class JointSpec:
    """One joint: a fixed transform followed by motion about/along `axis`."""

    kind: str
    pre_transform: Pose
    axis: np.ndarray

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        axis = np.array(self.axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("joint axis must be a unit 3-vector")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        # cache the Rodrigues ingredients; joint motion is evaluated per
        # control step for every joint
        k = hat(axis)
        object.__setattr__(self, "_hat", k)
        object.__setattr__(self, "_hat2", k @ k)


@dataclass(frozen=True)
class LinkShape:
    """Collision sphere rigidly attached to link `link` (0 <= link < n)."""

    link: int
    offset: Pose
    radius: float

    def __post_init__(self):
        if self.radius < 0.0:
            raise ValueError("collision sphere radius must be >= 0")


@dataclass(frozen=True)
class RobotModel:
    joints: tuple
    base_pose: Pose
    tool_offset: Pose
    q_min: np.ndarray
    q_max: np.ndarray
    qd_min: np.ndarray
    qd_max: np.ndarray
    link_shapes: tuple

    def __post_init__(self):
        n = len(self.joints)
        if n < 1:
            raise ValueError("robot needs at least one joint")
        object.__setattr__(self, "joints", tuple(self.joints))
        for name in ("q_min", "q_max", "qd_min", "qd_max"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise ValueError(f"{name} must have length {n}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not np.all(self.q_min < self.q_max):
            raise ValueError("q_min must be < q_max elementwise")
        if not (np.all(self.qd_min < 0.0) and np.all(self.qd_max > 0.0)):
            raise ValueError("velocity limits must straddle zero")
        for shape in self.link_shapes:
            if not 0 <= shape.link < n:
                raise ValueError(f"link shape index {shape.link} out of range")
        object.__setattr__(self, "link_shapes", tuple(self.link_shapes))

    @property
    def n(self) -> int:
        return len(self.joints)

    def check_q(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n,):
            raise ValueError(f"expected {self.n} joint coordinates, got shape {q.shape}")
        return q


def _joint_motion(joint: JointSpec, qi: float) -> Pose:
    if joint.kind == REVOLUTE:
        R = np.eye(3) + np.sin(qi) * joint._hat + (1.0 - np.cos(qi)) * joint._hat2
        return Pose._trusted(R, np.zeros(3))
    return Pose._trusted(np.eye(3), qi * joint.axis)


def forward_kinematics(model: RobotModel, q: np.ndarray) -> list[Pose]:
    """Base-frame pose of every link, plus the tool frame as the last entry.

    Entry k (k < n) is the frame after joint k has moved; entry n composes
    the tool offset on top of the last link.
    """
    q = model.check_q(q)
    poses = []
    T = model.base_pose
    for joint, qi in zip(model.joints, q):
        T = T @ joint.pre_transform @ _joint_motion(joint, qi)
        poses.append(T)
    poses.append(T @ model.tool_offset)
    return poses


def _frame_pose(model: RobotModel, q: np.ndarray, link: int, offset: Pose,
                poses: list[Pose] | None = None) -> Pose:
    if poses is None:
        poses = forward_kinematics(model, q)
    if not 0 <= link <= model.n:
        raise ValueError(f"link index {link} out of range (0..{model.n})")
    return poses[link] @ offset


def _joint_frames(model: RobotModel, q: np.ndarray):
    """World axis direction and world origin of every joint axis."""
    q = model.check_q(q)
    axes = np.empty((model.n, 3))
    origins = np.empty((model.n, 3))
    T = model.base_pose
    for i, (joint, qi) in enumerate(zip(model.joints, q)):
        T_axis = T @ joint.pre_transform
        axes[i] = T_axis.rotation @ joint.axis
        origins[i] = T_axis.translation
        T = T_axis @ _joint_motion(joint, qi)
    return axes, origins, T @ model.tool_offset


def _geometric_jacobian(model, q, target_point: np.ndarray, n_cols: int) -> np.ndarray:
    axes, origins, _ = _joint_frames(model, q)
    J = np.zeros((6, n_cols))
    for i in range(n_cols):
        if model.joints[i].kind == REVOLUTE:
            J[:3, i] = np.cross(axes[i], target_point - origins[i])
            J[3:, i] = axes[i]
        else:
            J[:3, i] = axes[i]
    return J


def jacobian(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """6xn geometric Jacobian of the tool frame, base-frame, rows (v, omega)."""
    _, _, tool = _joint_frames(model, q)
    return _geometric_jacobian(model, q, tool.translation, model.n)


def point_jacobian(model: RobotModel, q: np.ndarray, link: int, offset: Pose) -> np.ndarray:
    """Translational Jacobian of a point rigidly attached to a link.

    Only the joints that actually move the point appear as columns: link k
    yields k+1 columns, link == n (the tool frame) yields all n. The angular
    rows are dropped; the caller projects onto a direction anyway.
    """
    point = _frame_pose(model, q, link, offset).translation
    n_cols = model.n if link >= model.n else link + 1
    return _geometric_jacobian(model, q, point, n_cols)[:3, :]


def hessian(model: RobotModel, q: np.ndarray, J: np.ndarray | None = None) -> np.ndarray:
    """6xnxn tensor H with H[:, :, i] = dJ/dq_i.

    Built from cross products of Jacobian columns: for i <= j the column-j
    derivative w.r.t. q_i is (w_i x v_j, w_i x w_j); for i > j it is
    (w_j x v_i, 0). The translational block is symmetric in (i, j).
    """
    if J is None:
        J = jacobian(model, q)
    n = model.n
    v, w = J[:3, :].T, J[3:, :].T
    wv = np.cross(w[:, None, :], v[None, :, :])  # wv[a, b] = w_a x v_b
    ww = np.cross(w[:, None, :], w[None, :, :])
    deriv, col = np.indices((n, n))
    trans = wv[np.minimum(deriv, col), np.maximum(deriv, col)]
    rot = np.where((deriv <= col)[:, :, None], ww[deriv, col], 0.0)
    H = np.empty((6, n, n))
    H[:3] = np.transpose(trans, (2, 1, 0))  # [axis, col j, deriv i]
    H[3:] = np.transpose(rot, (2, 1, 0))
    return H


def shape_center(model: RobotModel, q: np.ndarray, shape: LinkShape,
                 poses: list[Pose] | None = None) -> np.ndarray:
    """World position of a collision sphere's center; `poses` may carry a
    precomputed forward_kinematics result."""
    return _frame_pose(model, q, shape.link, shape.offset, poses).translation


# ---------------------------------------------------------------------------
# Model files
#
# YAML schema (all transforms are translation + roll/pitch/yaw, radians):
#
#   name: my_robot
#   base: {translation: [x, y, z], rpy: [r, p, y]}        # optional
#   tool: {translation: [x, y, z], rpy: [r, p, y]}        # optional
#   joints:
#     - kind: revolute | prismatic
#       axis: [0, 0, 1]
#       pre: {translation: [...], rpy: [...]}
#       q_min: -2.9
#       q_max: 2.9
#       qd_max: 2.5          # qd_min defaults to -qd_max
#       qd_min: -2.5         # optional
#   collision_spheres:
#     - {link: 3, center: [x, y, z], radius: 0.06}
# ---------------------------------------------------------------------------


class ModelFileError(ValueError):
    """Raised with the offending field name when a model file is malformed."""


def _pose_from_dict(d, where: str) -> Pose:
    if d is None:
        return Pose.identity()
    if not isinstance(d, dict):
        raise ModelFileError(f"{where}: expected a mapping with translation/rpy")
    translation = d.get("translation", [0.0, 0.0, 0.0])
    rpy = d.get("rpy", [0.0, 0.0, 0.0])
    try:
        return Pose.from_rpy(translation, tuple(float(x) for x in rpy))
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{where}: {exc}") from exc


def robot_from_dict(data: dict) -> RobotModel:
    if not isinstance(data, dict) or "joints" not in data:
        raise ModelFileError("joints: missing joint list")
    joints, q_min, q_max, qd_min, qd_max = [], [], [], [], []
    for i, jd in enumerate(data["joints"]):
        where = f"joints[{i}]"
        if not isinstance(jd, dict):
            raise ModelFileError(f"{where}: expected a mapping")
        try:
            kind = jd["kind"]
            axis = np.asarray(jd["axis"], dtype=float)
            q_min.append(float(jd["q_min"]))
            q_max.append(float(jd["q_max"]))
            vmax = float(jd["qd_max"])
        except KeyError as exc:
            raise ModelFileError(f"{where}.{exc.args[0]}: missing") from exc
        except (TypeError, ValueError) as exc:
            raise ModelFileError(f"{where}: {exc}") from exc
        qd_max.append(vmax)
        qd_min.append(float(jd.get("qd_min", -vmax)))
        try:
            joints.append(JointSpec(kind, _pose_from_dict(jd.get("pre"), f"{where}.pre"), axis))
        except ValueError as exc:
            raise ModelFileError(f"{where}: {exc}") from exc
    shapes = []
    for i, sd in enumerate(data.get("collision_spheres", [])):
        where = f"collision_spheres[{i}]"
        try:
            shapes.append(
                LinkShape(
                    int(sd["link"]),
                    Pose.from_rpy(sd.get("center", [0.0, 0.0, 0.0])),
                    float(sd["radius"]),
                )
            )
        except KeyError as exc:
            raise ModelFileError(f"{where}.{exc.args[0]}: missing") from exc
        except (TypeError, ValueError) as exc:
            raise ModelFileError(f"{where}: {exc}") from exc
    try:
        return RobotModel(
            joints=tuple(joints),
            base_pose=_pose_from_dict(data.get("base"), "base"),
            tool_offset=_pose_from_dict(data.get("tool"), "tool"),
            q_min=np.array(q_min),
            q_max=np.array(q_max),
            qd_min=np.array(qd_min),
            qd_max=np.array(qd_max),
            link_shapes=tuple(shapes),
        )
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def load_robot_model(path) -> RobotModel:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelFileError(f"{path}: {exc}") from exc
    return robot_from_dict(data)
