"""Shipped robot models.

The 7-DOF Panda parameters below are the manufacturer's published
kinematics (modified-DH link table and joint limits), entered as plain
configuration data. Collision spheres are a hand-placed cover of the arm:
shoulder column, upper arm, elbow, forearm, wrist and hand.
"""

from __future__ import annotations

import numpy as np

from .kinematics import JointSpec, LinkShape, RobotModel, REVOLUTE
from .se3 import Pose, rotation_about

_X = np.array([1.0, 0.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


def _dh_pre(a: float, d: float, alpha: float) -> Pose:
    """Fixed transform Rot_x(alpha) * Trans(a, 0, d) preceding a z-axis joint."""
    R = rotation_about(_X, alpha)
    return Pose(R, R @ np.array([a, 0.0, d]))


# (a_{i-1}, d_i, alpha_{i-1}) per joint, flange handled as the tool offset
_PANDA_DH = [
    (0.0, 0.333, 0.0),
    (0.0, 0.0, -np.pi / 2),
    (0.0, 0.316, np.pi / 2),
    (0.0825, 0.0, np.pi / 2),
    (-0.0825, 0.384, -np.pi / 2),
    (0.0, 0.0, np.pi / 2),
    (0.088, 0.0, np.pi / 2),
]

_PANDA_Q_MIN = [-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973]
_PANDA_Q_MAX = [2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973]
_PANDA_QD_MAX = [2.1750, 2.1750, 2.1750, 2.1750, 2.6100, 2.6100, 2.6100]

# A comfortable elbow-up configuration used as the default start pose.
PANDA_READY = np.array([0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.7854])


def _sphere(link: int, center, radius: float) -> LinkShape:
    return LinkShape(link, Pose(np.eye(3), np.asarray(center, dtype=float)), radius)


_PANDA_SPHERES = [
    _sphere(0, (0.0, 0.0, -0.19), 0.10),   # base column
    _sphere(0, (0.0, 0.0, -0.05), 0.09),   # shoulder
    _sphere(2, (0.0, 0.0, -0.22), 0.08),   # upper arm
    _sphere(2, (0.0, 0.0, -0.10), 0.08),
    _sphere(3, (0.0, 0.0, 0.0), 0.08),     # elbow
    _sphere(4, (0.0, 0.02, -0.25), 0.07),  # forearm
    _sphere(4, (0.0, 0.02, -0.12), 0.07),
    _sphere(4, (0.0, 0.0, 0.0), 0.07),     # wrist
    _sphere(6, (0.0, 0.0, 0.06), 0.06),    # hand
    _sphere(6, (0.0, 0.0, 0.12), 0.05),    # fingers / end-effector
]


def panda() -> RobotModel:
    """7-DOF Panda arm, base at the world origin, flange as tool frame."""
    joints = tuple(
        JointSpec(REVOLUTE, _dh_pre(a, d, alpha), _Z) for a, d, alpha in _PANDA_DH
    )
    qd_max = np.array(_PANDA_QD_MAX)
    return RobotModel(
        joints=joints,
        base_pose=Pose.identity(),
        tool_offset=Pose(np.eye(3), np.array([0.0, 0.0, 0.107])),
        q_min=np.array(_PANDA_Q_MIN),
        q_max=np.array(_PANDA_Q_MAX),
        qd_min=-qd_max,
        qd_max=qd_max,
        link_shapes=tuple(_PANDA_SPHERES),
    )


_BUILTIN = {"panda": panda}


def builtin_model(name: str) -> RobotModel:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown builtin model {name!r}; have {sorted(_BUILTIN)}")
