"""Sphere-sphere distance geometry and velocity-damper constraint rows.

Distances are surface-to-surface, so a stopping distance of 0.05 m reads as
true clearance. Each (robot sphere, obstacle) pair inside the influence
distance contributes one inequality row that caps the approach speed:

    d_dot >= -xi * (d - d_s) / (d_i - d_s)

which, written for a row of A x <= b over joint velocities, becomes

    (n_or^T J_p) qd <= xi * (d - d_s) / (d_i - d_s) + n_or^T p_o_dot

with n_or the unit vector from the robot point to the obstacle point. While
such a row is active the distance cannot be driven below d_s; an obstacle
moving in (n_or^T p_o_dot < 0) tightens the bound and can force retreat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import (
    LinkShape,
    RobotModel,
    forward_kinematics,
    point_jacobian,
    shape_center,
)
from .se3 import Pose

# Fallback direction when sphere centers coincide and no separation
# direction exists.
_FALLBACK_DIR = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Obstacle:
    """Sphere obstacle with a (piecewise) constant velocity."""

    center: np.ndarray
    radius: float
    velocity: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        velocity = np.array(self.velocity, dtype=float)
        if center.shape != (3,) or velocity.shape != (3,):
            raise ValueError("obstacle center and velocity must be 3-vectors")
        if self.radius < 0.0:
            raise ValueError("obstacle radius must be >= 0")
        if not np.all(np.isfinite(velocity)):
            raise ValueError("obstacle velocity must be finite")
        center.setflags(write=False)
        velocity.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "velocity", velocity)


@dataclass(frozen=True)
class DistanceWitness:
    """Closest points of a robot sphere / obstacle pair.

    `n_or` points from the robot point toward the obstacle point; `d` is the
    surface-to-surface distance (negative when penetrating).
    """

    p_r: np.ndarray
    p_o: np.ndarray
    d: float
    n_or: np.ndarray
    link: int
    shape_offset: Pose
    penetrating: bool = False


@dataclass(frozen=True)
class DamperRow:
    """One inequality row coeffs . qd <= bound over the n joint velocities."""

    coeffs: np.ndarray
    bound: float


def closest_witness(
    model: RobotModel, q: np.ndarray, link_shape: LinkShape, obstacle: Obstacle,
    poses=None,
) -> DistanceWitness:
    """Closest-point pair between a robot sphere and an obstacle sphere.

    Coincident centers fall back to the +z separation direction with
    d = -(r_r + r_o) and the penetration flag set.
    """
    c_r = shape_center(model, q, link_shape, poses)
    c_o = obstacle.center
    diff = c_o - c_r
    dist = float(np.linalg.norm(diff))
    if dist < 1e-9:
        n_or = _FALLBACK_DIR
        d = -(link_shape.radius + obstacle.radius)
    else:
        n_or = diff / dist
        d = dist - link_shape.radius - obstacle.radius
    return DistanceWitness(
        p_r=c_r + link_shape.radius * n_or,
        p_o=c_o - obstacle.radius * n_or,
        d=d,
        n_or=n_or,
        link=link_shape.link,
        shape_offset=link_shape.offset,
        penetrating=d < 0.0,
    )


def distance_jacobian(model: RobotModel, q: np.ndarray, witness: DistanceWitness) -> np.ndarray:
    """Row vector J_d (length n, zero beyond the witness link) such that

        d_dot = J_d qd + n_or^T p_o_dot

    i.e. J_d = -n_or^T J_p with J_p the translational point Jacobian of the
    sphere center. Moving the attachment point toward the obstacle makes
    J_d qd negative.
    """
    J_p = point_jacobian(model, q, witness.link, witness.shape_offset)
    row = np.zeros(model.n)
    row[: J_p.shape[1]] = -(witness.n_or @ J_p)
    return row


def damper_row(
    witness: DistanceWitness,
    J_d: np.ndarray,
    xi: float,
    d_i: float,
    d_s: float,
    obstacle_velocity: np.ndarray,
) -> DamperRow:
    """Velocity-damper inequality for one witness pair.

    The caller filters by d < d_i. The row constrains the approach speed:
    -J_d qd <= xi (d - d_s)/(d_i - d_s) + n_or^T p_o_dot, so at d = d_s the
    approach speed toward a static obstacle is fully forbidden. A penetrating
    pair (d < 0) still yields a row, with a negative budget that pushes the
    pair apart.
    """
    if d_i <= d_s:
        raise ValueError("influence distance d_i must exceed stopping distance d_s")
    budget = xi * (witness.d - d_s) / (d_i - d_s)
    bound = budget + float(witness.n_or @ np.asarray(obstacle_velocity, dtype=float))
    return DamperRow(coeffs=-np.asarray(J_d, dtype=float), bound=bound)


def all_witnesses(model: RobotModel, q: np.ndarray, obstacles: list, poses=None):
    """Every (shape, obstacle index, witness) triple, ordered by link index
    then obstacle index."""
    if poses is None:
        poses = forward_kinematics(model, q)
    shapes = sorted(model.link_shapes, key=lambda s: s.link)
    return [
        (shape, j, closest_witness(model, q, shape, obstacles[j], poses))
        for shape in shapes
        for j in range(len(obstacles))
    ]


def collect_constraints(
    model: RobotModel,
    q: np.ndarray,
    obstacles: list,
    xi: float,
    d_i: float,
    d_s: float,
    witnesses=None,
) -> list[DamperRow]:
    """Damper rows for every (robot sphere, obstacle) pair with d < d_i.

    Rows come out ordered by link index, then obstacle index, so constraint
    stacking is deterministic. Returns [] when nothing is within influence.
    """
    if witnesses is None:
        witnesses = all_witnesses(model, q, obstacles)
    rows = []
    for _, j, witness in witnesses:
        if witness.d >= d_i:
            continue
        J_d = distance_jacobian(model, q, witness)
        rows.append(damper_row(witness, J_d, xi, d_i, d_s, obstacles[j].velocity))
    return rows


def min_clearances(model: RobotModel, q: np.ndarray, obstacles: list) -> np.ndarray:
    """Per-obstacle minimum surface clearance over all robot spheres."""
    poses = forward_kinematics(model, q) if model.link_shapes else None
    out = np.full(len(obstacles), np.inf)
    for shape in model.link_shapes:
        c_r = shape_center(model, q, shape, poses)
        for j, obstacle in enumerate(obstacles):
            d = np.linalg.norm(obstacle.center - c_r) - shape.radius - obstacle.radius
            if d < out[j]:
                out[j] = d
    return out
