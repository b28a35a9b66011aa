"""Reactive QP controller for one control step.

Each step solves a strictly convex QP over x = (qd, delta):

    min  1/2 qd^T (lambda_q I) qd + 1/2 delta^T (lambda_delta I) delta
         - Jm^T qd
    s.t. [J  I6] x = nu           desired end-effector twist
         damper rows              obstacle + joint-limit velocity dampers
         qd within velocity box, delta within +-slack_bound

The slack vector delta lets the end-effector deviate from the commanded
twist when constraints demand it; its weight grows as the pose error
shrinks, so the goal is still driven to convergence. The linear term climbs
the manipulability gradient. Inside the goal tolerance the controller holds
position (zero command) instead of letting the manipulability term churn
the null space.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import qp
from .collision import DamperRow, Obstacle, all_witnesses, collect_constraints
from .kinematics import RobotModel, forward_kinematics, hessian, jacobian
from .manipulability import SingularityError, manipulability, manipulability_jacobian
from .se3 import Pose, Twist, pose_error_twist

TRACKING = "tracking"
RETREATING = "retreating"
STALLED = "stalled"
FAILED = "failed"

_STALL_SPEED = 1e-4


@dataclass(frozen=True)
class LambdaDeltaMode:
    """Slack weight schedule: a constant, or 1/max(error, epsilon)."""

    kind: str  # "fixed" | "inverse_error"
    value: float

    @staticmethod
    def fixed(value: float) -> "LambdaDeltaMode":
        return LambdaDeltaMode("fixed", float(value))

    @staticmethod
    def inverse_error(epsilon: float = 1e-3) -> "LambdaDeltaMode":
        return LambdaDeltaMode("inverse_error", float(epsilon))


def lambda_delta(pose_error_norm: float, mode: LambdaDeltaMode) -> float:
    """Slack weight for the current pose error."""
    if mode.kind == "fixed":
        return mode.value
    return 1.0 / max(pose_error_norm, mode.value)


@dataclass(frozen=True)
class ControllerParams:
    """All gains and damper distances.

    Setting xi or eta to exactly 0 disables the corresponding damper rows
    entirely (useful for ablations); positive values scale the damper
    aggressiveness.
    """

    beta: float = 1.0
    lambda_q: float = 0.01
    lambda_delta_mode: LambdaDeltaMode = field(default_factory=LambdaDeltaMode.inverse_error)
    xi: float = 1.0
    eta: float = 1.0
    d_i: float = 0.3
    d_s: float = 0.05
    rho_i: float = np.deg2rad(50.0)
    rho_s: float = np.deg2rad(2.0)
    slack_bound: float = 1e3
    goal_tol_pos: float = 0.01
    goal_tol_ang: float = 0.02
    retreat_gain: float = 0.2
    # ablation knob scaling the manipulability cost term; 1.0 is nominal,
    # 0.0 removes the linear term entirely (plain velocity-norm control)
    manip_weight: float = 1.0

    def __post_init__(self):
        if not (self.d_i > self.d_s >= 0.0):
            raise ValueError("need d_i > d_s >= 0")
        if not (self.rho_i > self.rho_s >= 0.0):
            raise ValueError("need rho_i > rho_s >= 0")
        if self.beta <= 0.0 or self.lambda_q <= 0.0:
            raise ValueError("beta and lambda_q must be positive")
        if self.xi < 0.0 or self.eta < 0.0:
            raise ValueError("xi and eta must be >= 0 (0 disables the damper)")

    def with_overrides(self, **kwargs) -> "ControllerParams":
        return replace(self, **kwargs)


@dataclass
class StepDiagnostics:
    manipulability: float
    jm_norm: float
    active_constraints: int
    min_clearance: float  # inf when no obstacles
    pos_err: float
    ang_err: float
    singular: bool = False


@dataclass
class ControlStep:
    qd: np.ndarray
    delta: np.ndarray
    status: str
    solve_time: float
    diagnostics: StepDiagnostics


def desired_velocity(current: Pose, goal: Pose, beta: float) -> Twist:
    """Position-based servo twist: beta * pose_error_twist(current, goal)."""
    return pose_error_twist(current, goal).scaled(beta)


def joint_limit_rows(q: np.ndarray, model: RobotModel, params: ControllerParams) -> list[DamperRow]:
    """Velocity-damper rows for joints within rho_i of a position limit.

    Each affected joint gets one row capping motion toward its nearer limit:
    +qd_j when nearing the upper limit, -qd_j when nearing the lower.
    """
    if params.eta == 0.0:
        return []
    q = model.check_q(q)
    rows = []
    for j in range(model.n):
        to_lower = q[j] - model.q_min[j]
        to_upper = model.q_max[j] - q[j]
        rho = min(to_lower, to_upper)
        if rho >= params.rho_i:
            continue
        coeffs = np.zeros(model.n)
        coeffs[j] = 1.0 if to_upper <= to_lower else -1.0
        bound = params.eta * (rho - params.rho_s) / (params.rho_i - params.rho_s)
        rows.append(DamperRow(coeffs=coeffs, bound=bound))
    return rows


def _segment_hits_sphere(p0, p1, center, radius) -> bool:
    seg = p1 - p0
    seg_len2 = float(seg @ seg)
    if seg_len2 < 1e-18:
        return bool(np.linalg.norm(center - p0) <= radius)
    t = float(np.clip((center - p0) @ seg / seg_len2, 0.0, 1.0))
    return bool(np.linalg.norm(p0 + t * seg - center) <= radius)


def retreat_trigger(
    ee_position: np.ndarray,
    goal_position: np.ndarray,
    witness,
    obstacle: Obstacle,
    nu: Twist,
    params: ControllerParams,
    base_origin: np.ndarray,
):
    """Local-minimum escape: retreat toward the base when the closest
    obstacle blocks the line of sight to the goal.

    `witness`/`obstacle` must be the globally closest robot-obstacle pair.
    Triggers iff the EE-goal segment intersects that obstacle's sphere and
    the pair is within the influence distance; the v_x, v_y components of
    the desired twist are then replaced by a horizontal unit vector from the
    EE toward the base, scaled by retreat_gain.
    """
    if witness is None or witness.d >= params.d_i:
        return False, nu
    if not _segment_hits_sphere(ee_position, goal_position, obstacle.center, obstacle.radius):
        return False, nu
    horiz = np.array(base_origin[:2]) - np.array(ee_position[:2])
    norm = float(np.linalg.norm(horiz))
    if norm < 1e-9:
        return False, nu
    v = nu.v.copy()
    v[:2] = params.retreat_gain * horiz / norm
    return True, Twist(v, nu.omega)


def _closest_pair(witnesses, obstacles):
    """Globally closest (witness, obstacle) pair, or (None, None)."""
    best = (None, None)
    best_d = np.inf
    for _, j, w in witnesses:
        if w.d < best_d:
            best_d = w.d
            best = (w, obstacles[j])
    return best


def _build(model, q, goal, obstacles, params, nu=None, poses=None, witnesses=None):
    n = model.n
    if poses is None:
        poses = forward_kinematics(model, q)
    ee = poses[-1]
    err = pose_error_twist(ee, goal)
    if nu is None:
        nu = desired_velocity(ee, goal, params.beta)

    J = jacobian(model, q)
    m_val = manipulability(J)
    singular = False
    J_m = np.zeros(n)
    if params.manip_weight != 0.0:
        try:
            J_m = params.manip_weight * manipulability_jacobian(J, hessian(model, q, J), m_val)
        except SingularityError:
            singular = True

    ld = lambda_delta(err.norm(), params.lambda_delta_mode)
    Q = np.diag(np.concatenate([np.full(n, params.lambda_q), np.full(6, ld)]))
    c = np.concatenate([-J_m, np.zeros(6)])
    A_eq = np.hstack([J, np.eye(6)])

    rows = []
    if params.xi > 0.0 and obstacles:
        rows.extend(
            collect_constraints(
                model, q, obstacles, params.xi, params.d_i, params.d_s,
                witnesses=witnesses,
            )
        )
    rows.extend(joint_limit_rows(q, model, params))
    if rows:
        A_in = np.array([np.concatenate([r.coeffs, np.zeros(6)]) for r in rows])
        b_in = np.array([r.bound for r in rows])
    else:
        A_in = np.zeros((0, n + 6))
        b_in = np.zeros(0)

    lower = np.concatenate([model.qd_min, np.full(6, -params.slack_bound)])
    upper = np.concatenate([model.qd_max, np.full(6, params.slack_bound)])

    problem = qp.QPProblem(Q, c, A_eq, nu.as_array(), A_in, b_in, lower, upper)
    info = {
        "m": m_val,
        "jm_norm": float(np.linalg.norm(J_m)),
        "singular": singular,
        "n_rows": len(rows),
        "err": err,
        "ee": ee,
    }
    return problem, info


def assemble(
    model: RobotModel,
    q: np.ndarray,
    goal: Pose,
    obstacles: list,
    params: ControllerParams,
    nu: Twist | None = None,
) -> qp.QPProblem:
    """QP over (qd, delta) for the current state; `nu` overrides the servo
    twist (used by the retreat heuristic)."""
    return _build(model, q, goal, obstacles, params, nu)[0]


def step(
    model: RobotModel,
    q: np.ndarray,
    goal: Pose,
    obstacles: list,
    params: ControllerParams,
) -> ControlStep:
    """Assemble and solve one control step; never raises on solver failure
    (commands zero velocity and reports `failed` instead)."""
    t0 = time.perf_counter()
    n = model.n
    poses = forward_kinematics(model, q)
    ee = poses[-1]
    err = pose_error_twist(ee, goal)
    pos_err = float(np.linalg.norm(err.v))
    ang_err = float(np.linalg.norm(err.omega))
    at_goal = pos_err < params.goal_tol_pos and ang_err < params.goal_tol_ang

    witnesses = all_witnesses(model, q, obstacles, poses=poses)
    witness, closest_obstacle = _closest_pair(witnesses, obstacles)
    min_clear = witness.d if witness is not None else np.inf

    if at_goal:
        m_val = manipulability(jacobian(model, q))
        diag = StepDiagnostics(m_val, 0.0, 0, min_clear, pos_err, ang_err)
        return ControlStep(np.zeros(n), np.zeros(6), TRACKING,
                           time.perf_counter() - t0, diag)

    nu = desired_velocity(ee, goal, params.beta)
    retreating = False
    if witness is not None:
        retreating, nu = retreat_trigger(
            ee.translation, goal.translation, witness, closest_obstacle,
            nu, params, model.base_pose.translation,
        )

    problem, info = _build(model, q, goal, obstacles, params, nu=nu,
                           poses=poses, witnesses=witnesses)
    solution = qp.solve(problem)
    solve_time = time.perf_counter() - t0

    diag = StepDiagnostics(
        manipulability=info["m"],
        jm_norm=info["jm_norm"],
        active_constraints=info["n_rows"],
        min_clearance=min_clear,
        pos_err=pos_err,
        ang_err=ang_err,
        singular=info["singular"],
    )
    if solution.status != qp.OPTIMAL:
        return ControlStep(np.zeros(n), np.zeros(6), FAILED, solve_time, diag)

    qd = solution.x[:n]
    delta = solution.x[n:]
    status = RETREATING if retreating else TRACKING
    if float(np.linalg.norm(qd)) < _STALL_SPEED:
        status = STALLED
    return ControlStep(qd, delta, status, solve_time, diag)
