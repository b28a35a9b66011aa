import numpy as np
import pytest

from qpservo.kinematics import (
    JointSpec,
    LinkShape,
    RobotModel,
    forward_kinematics,
    jacobian,
    PRISMATIC,
    REVOLUTE,
)
from qpservo.models import panda
from qpservo.se3 import Pose, rotation_log

Z = np.array([0.0, 0.0, 1.0])


def make_model(joints, tool=None, shapes=(), q_range=3.5, qd_limit=2.5):
    n = len(joints)
    return RobotModel(
        joints=tuple(joints),
        base_pose=Pose.identity(),
        tool_offset=tool if tool is not None else Pose.identity(),
        q_min=np.full(n, -q_range),
        q_max=np.full(n, q_range),
        qd_min=np.full(n, -qd_limit),
        qd_max=np.full(n, qd_limit),
        link_shapes=tuple(shapes),
    )


def one_joint_revolute(lever=1.0):
    """Single revolute joint about z at the origin, tool at (lever, 0, 0)."""
    return make_model(
        [JointSpec(REVOLUTE, Pose.identity(), Z)],
        tool=Pose(np.eye(3), np.array([lever, 0.0, 0.0])),
    )


def one_joint_prismatic():
    return make_model([JointSpec(PRISMATIC, Pose.identity(), Z)])


def planar_2r(l1=1.0, l2=1.0, shapes=()):
    """Two revolute z joints in the xy plane; EE at the tip of link 2."""
    joints = [
        JointSpec(REVOLUTE, Pose.identity(), Z),
        JointSpec(REVOLUTE, Pose(np.eye(3), np.array([l1, 0.0, 0.0])), Z),
    ]
    return make_model(joints, tool=Pose(np.eye(3), np.array([l2, 0.0, 0.0])), shapes=shapes)


@pytest.fixture(scope="session")
def panda_model():
    return panda()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_configurations(model, count, rng, margin=0.05):
    """Uniform samples strictly inside the joint limits."""
    span = model.q_max - model.q_min
    lo = model.q_min + margin * span
    hi = model.q_max - margin * span
    return rng.uniform(lo, hi, size=(count, model.n))


# ---------------------------------------------------------------------------
# Independent finite-difference oracles. These re-derive each quantity from
# one level further down the stack and never call the function under test.
# ---------------------------------------------------------------------------


def fd_jacobian(model, q, h=1e-7):
    """Central differences of forward kinematics (position + rotation log)."""
    n = model.n
    J = np.zeros((6, n))
    for i in range(n):
        dq = np.zeros(n)
        dq[i] = h
        hi = forward_kinematics(model, q + dq)[-1]
        lo = forward_kinematics(model, q - dq)[-1]
        J[:3, i] = (hi.translation - lo.translation) / (2 * h)
        J[3:, i] = rotation_log(hi.rotation @ lo.rotation.T) / (2 * h)
    return J


def fd_hessian(model, q, h=1e-6):
    n = model.n
    H = np.zeros((6, n, n))
    for i in range(n):
        dq = np.zeros(n)
        dq[i] = h
        H[:, :, i] = (jacobian(model, q + dq) - jacobian(model, q - dq)) / (2 * h)
    return H


def fd_point_position_jacobian(model, q, link, offset, h=1e-7):
    from qpservo.kinematics import _frame_pose

    n_cols = model.n if link >= model.n else link + 1
    J = np.zeros((3, n_cols))
    for i in range(n_cols):
        dq = np.zeros(model.n)
        dq[i] = h
        hi = _frame_pose(model, q + dq, link, offset).translation
        lo = _frame_pose(model, q - dq, link, offset).translation
        J[:, i] = (hi - lo) / (2 * h)
    return J
