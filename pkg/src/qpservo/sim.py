"""Discrete-time closed-loop simulation.

The loop is purely kinematic: commanded joint velocities are realised
exactly and integrated with explicit Euler at a fixed stride. Obstacles and
the goal pose follow piecewise-constant-velocity tracks that the controller
sees exactly (full state information). Runs are deterministic: the same
scenario always produces a bit-identical trace.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import controller as ctrl
from .collision import Obstacle, min_clearances
from .controller import ControllerParams, LambdaDeltaMode
from .kinematics import ModelFileError, RobotModel, load_robot_model
from .models import builtin_model
from .se3 import Pose, rotation_about

log = logging.getLogger("qpservo.sim")

REACHED = "reached"
COLLIDED = "collided"
TIMEOUT = "timeout"
SOLVER_FAILED = "solver_failed"


class ScenarioError(ValueError):
    """Scenario file problem; the message names the offending field."""


@dataclass(frozen=True)
class MotionSegment:
    """Constant velocity over [start, start + duration)."""

    start: float
    duration: float
    velocity: np.ndarray
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class GoalTrajectory:
    initial: Pose
    segments: tuple = ()

    def __post_init__(self):
        prev_end = -np.inf
        for seg in self.segments:
            if seg.start < prev_end:
                raise ScenarioError("goal.segments: segments must not overlap")
            prev_end = seg.start + seg.duration

    def pose_at(self, t: float) -> Pose:
        R = self.initial.rotation
        p = self.initial.translation.copy()
        for seg in self.segments:
            tau = float(np.clip(t - seg.start, 0.0, seg.duration))
            if tau <= 0.0:
                continue
            p = p + tau * np.asarray(seg.velocity)
            w = np.asarray(seg.angular)
            angle = float(np.linalg.norm(w)) * tau
            if angle > 0.0:
                R = rotation_about(w / np.linalg.norm(w), angle) @ R
        return Pose(R, p)


@dataclass(frozen=True)
class ObstacleTrack:
    """Sphere with piecewise-constant velocity; outside all segments it is
    at rest."""

    center: np.ndarray
    radius: float
    segments: tuple = ()

    def state_at(self, t: float) -> Obstacle:
        p = np.array(self.center, dtype=float)
        v = np.zeros(3)
        for seg in self.segments:
            tau = float(np.clip(t - seg.start, 0.0, seg.duration))
            p = p + tau * np.asarray(seg.velocity)
            if seg.start <= t < seg.start + seg.duration:
                v = v + np.asarray(seg.velocity)
        return Obstacle(center=p, radius=self.radius, velocity=v)


@dataclass(frozen=True)
class Scenario:
    model: RobotModel
    model_ref: str
    q0: np.ndarray
    goal: GoalTrajectory
    obstacles: tuple
    dt: float = 0.02
    max_time: float = 15.0
    params: ControllerParams = field(default_factory=ControllerParams)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ScenarioError("dt: must be > 0")
        if self.max_time < self.dt:
            raise ScenarioError("max_time: must be >= dt")
        q0 = self.model.check_q(self.q0)
        q0.setflags(write=False)
        object.__setattr__(self, "q0", q0)

    def with_overrides(self, dt=None, max_time=None, params=None) -> "Scenario":
        changes = {}
        if dt is not None:
            changes["dt"] = dt
        if max_time is not None:
            changes["max_time"] = max_time
        if params is not None:
            changes["params"] = params
        return replace(self, **changes)


@dataclass
class StepTrace:
    t: float
    q: np.ndarray
    qd: np.ndarray
    delta: np.ndarray
    clearances: np.ndarray  # one per obstacle
    manipulability: float
    pos_err: float
    ang_err: float
    solve_ms: float
    status: str

    @property
    def solve_time(self) -> float:
        """Controller step wall time in seconds."""
        return self.solve_ms / 1000.0


@dataclass
class Outcome:
    result: str
    time_to_goal: float  # nan unless reached
    min_clearance_overall: float  # inf when the scene has no obstacles
    mean_solve_time: float  # seconds


def integrate(q: np.ndarray, qd: np.ndarray, dt: float, model: RobotModel) -> np.ndarray:
    """Explicit Euler update q + qd*dt; logs a warning if the result leaves
    the position limits (the joint-limit dampers should prevent that)."""
    q = model.check_q(q)
    qd = np.asarray(qd, dtype=float)
    if qd.shape != q.shape:
        raise ValueError("qd dimension mismatch")
    q_next = q + qd * dt
    if np.any(q_next < model.q_min) or np.any(q_next > model.q_max):
        log.warning("integration left joint position limits")
    return q_next


def run(scenario: Scenario) -> tuple[list[StepTrace], Outcome]:
    """Closed loop: advance goal/obstacles, control, record, integrate.

    Terminates on goal tolerance, collision (negative surface clearance),
    solver failure, or max_time.
    """
    model = scenario.model
    params = scenario.params
    q = np.array(scenario.q0)
    traces: list[StepTrace] = []
    n_steps = int(np.floor(scenario.max_time / scenario.dt + 1e-9))

    for i in range(n_steps + 1):
        t = i * scenario.dt
        goal = scenario.goal.pose_at(t)
        obstacles = [track.state_at(t) for track in scenario.obstacles]

        step = ctrl.step(model, q, goal, obstacles, params)
        clearances = min_clearances(model, q, obstacles)
        d = step.diagnostics

        collided = clearances.size > 0 and float(np.min(clearances)) < 0.0
        reached = d.pos_err < params.goal_tol_pos and d.ang_err < params.goal_tol_ang
        if collided:
            status = COLLIDED
        elif reached:
            status = REACHED
        else:
            status = step.status

        traces.append(
            StepTrace(
                t=t,
                q=q.copy(),
                qd=np.array(step.qd),
                delta=np.array(step.delta),
                clearances=clearances,
                manipulability=d.manipulability,
                pos_err=d.pos_err,
                ang_err=d.ang_err,
                solve_ms=step.solve_time * 1000.0,
                status=status,
            )
        )
        if status in (COLLIDED, REACHED) or step.status == ctrl.FAILED:
            break
        q = integrate(q, step.qd, scenario.dt, model)

    return traces, summarize(traces)


def summarize(traces: list[StepTrace]) -> Outcome:
    """Aggregate a trace into an Outcome; raises on an empty trace."""
    if not traces:
        raise ValueError("cannot summarize an empty trace")
    min_clear = float(
        min((float(np.min(tr.clearances)) for tr in traces if tr.clearances.size), default=np.inf)
    )
    mean_solve = float(np.mean([tr.solve_time for tr in traces]))
    last = traces[-1]
    if min_clear < 0.0 or last.status == COLLIDED:
        result = COLLIDED
    elif last.status == REACHED:
        result = REACHED
    elif last.status == ctrl.FAILED:
        result = SOLVER_FAILED
    else:
        result = TIMEOUT
    time_to_goal = last.t if result == REACHED else float("nan")
    return Outcome(result, time_to_goal, min_clear, mean_solve)


# ---------------------------------------------------------------------------
# Scenario files
#
#   model: panda                  # builtin name, or a path relative to the file
#   q0: [ ... ]                   # n joint coordinates
#   dt: 0.02                      # optional, s
#   max_time: 15.0                # optional, s
#   goal:
#     position: [x, y, z]
#     rpy: [roll, pitch, yaw]     # radians, optional (default identity)
#     segments:                   # optional goal motion
#       - {start: 1.0, duration: 4.0, velocity: [vx, vy, vz],
#          angular: [wx, wy, wz]}
#   obstacles:
#     - center: [x, y, z]
#       radius: 0.05
#       velocity: [vx, vy, vz]    # constant for the whole run, or:
#       motion:
#         - {start: 0.0, duration: 5.0, velocity: [vx, vy, vz]}
#   params:                       # optional ControllerParams overrides
#     xi: 1.0
#     lambda_delta: 0.5           # number -> fixed weight; default 1/error
# ---------------------------------------------------------------------------

_PARAM_KEYS = {
    "beta", "lambda_q", "xi", "eta", "d_i", "d_s", "rho_i", "rho_s",
    "slack_bound", "goal_tol_pos", "goal_tol_ang", "retreat_gain",
    "manip_weight",
}


def params_from_dict(data: dict, base: ControllerParams | None = None) -> ControllerParams:
    base = base or ControllerParams()
    changes = {}
    for key, value in (data or {}).items():
        if key == "lambda_delta":
            if isinstance(value, dict):
                if value.get("mode") == "fixed":
                    changes["lambda_delta_mode"] = LambdaDeltaMode.fixed(value["value"])
                else:
                    changes["lambda_delta_mode"] = LambdaDeltaMode.inverse_error(
                        value.get("epsilon", 1e-3)
                    )
            else:
                changes["lambda_delta_mode"] = LambdaDeltaMode.fixed(float(value))
        elif key in _PARAM_KEYS:
            changes[key] = float(value)
        else:
            raise ScenarioError(f"params.{key}: unknown parameter")
    try:
        return base.with_overrides(**changes)
    except ValueError as exc:
        raise ScenarioError(f"params: {exc}") from exc


def _vector(data, name, length=3):
    try:
        v = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{name}: {exc}") from exc
    if v.shape != (length,):
        raise ScenarioError(f"{name}: expected {length} numbers")
    return v


def _segments_from(entries, where):
    segments = []
    for i, seg in enumerate(entries or []):
        if not isinstance(seg, dict):
            raise ScenarioError(f"{where}[{i}]: expected a mapping")
        try:
            start = float(seg["start"])
            duration = float(seg["duration"])
        except KeyError as exc:
            raise ScenarioError(f"{where}[{i}].{exc.args[0]}: missing") from exc
        velocity = _vector(seg.get("velocity", [0.0, 0.0, 0.0]), f"{where}[{i}].velocity")
        angular = _vector(seg.get("angular", [0.0, 0.0, 0.0]), f"{where}[{i}].angular")
        segments.append(MotionSegment(start, duration, velocity, angular))
    return tuple(segments)


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a mapping")
    for required in ("model", "q0", "goal"):
        if required not in data:
            raise ScenarioError(f"{required}: missing")

    ref = str(data["model"])
    try:
        model = builtin_model(ref)
    except KeyError:
        path = Path(ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"model: no builtin or file named {ref!r}")
        try:
            model = load_robot_model(path)
        except ModelFileError as exc:
            raise ScenarioError(f"model: {exc}") from exc

    goal_data = data["goal"]
    if not isinstance(goal_data, dict) or "position" not in goal_data:
        raise ScenarioError("goal.position: missing")
    goal_pose = Pose.from_rpy(
        _vector(goal_data["position"], "goal.position"),
        tuple(_vector(goal_data.get("rpy", [0.0, 0.0, 0.0]), "goal.rpy")),
    )
    goal = GoalTrajectory(goal_pose, _segments_from(goal_data.get("segments"), "goal.segments"))

    tracks = []
    for i, od in enumerate(data.get("obstacles", []) or []):
        where = f"obstacles[{i}]"
        if not isinstance(od, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        if "center" not in od or "radius" not in od:
            raise ScenarioError(f"{where}: needs center and radius")
        center = _vector(od["center"], f"{where}.center")
        try:
            radius = float(od["radius"])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{where}.radius: {exc}") from exc
        if "motion" in od:
            segments = _segments_from(od["motion"], f"{where}.motion")
        elif "velocity" in od:
            v = _vector(od["velocity"], f"{where}.velocity")
            segments = (MotionSegment(0.0, np.inf, v),) if np.any(v) else ()
        else:
            segments = ()
        tracks.append(ObstacleTrack(center, radius, segments))

    q0 = np.asarray(data["q0"], dtype=float)
    try:
        return Scenario(
            model=model,
            model_ref=ref,
            q0=q0,
            goal=goal,
            obstacles=tuple(tracks),
            dt=float(data.get("dt", 0.02)),
            max_time=float(data.get("max_time", 15.0)),
            params=params_from_dict(data.get("params")),
        )
    except (ValueError, ScenarioError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"{path}: no such file")
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}")
    return scenario_from_dict(data, base_dir=path.parent)


# ---------------------------------------------------------------------------
# CSV traces: fixed column order
#   t, q0..q{n-1}, qd0..qd{n-1}, delta0..delta5,
#   clearance_0..clearance_{m-1}, manipulability, pos_err, ang_err,
#   solve_ms, status
# Floats are written with repr and parse back bit-exactly.
# ---------------------------------------------------------------------------


def trace_header(n_joints: int, n_obstacles: int) -> list[str]:
    cols = ["t"]
    cols += [f"q{i}" for i in range(n_joints)]
    cols += [f"qd{i}" for i in range(n_joints)]
    cols += [f"delta{i}" for i in range(6)]
    cols += [f"clearance_{i}" for i in range(n_obstacles)]
    cols += ["manipulability", "pos_err", "ang_err", "solve_ms", "status"]
    return cols


def write_trace(traces: list[StepTrace], path) -> None:
    if not traces:
        raise ValueError("cannot write an empty trace")
    n = traces[0].q.size
    n_obs = traces[0].clearances.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n, n_obs))
        for tr in traces:
            row = [repr(tr.t)]
            row += [repr(float(v)) for v in tr.q]
            row += [repr(float(v)) for v in tr.qd]
            row += [repr(float(v)) for v in tr.delta]
            row += [repr(float(v)) for v in tr.clearances]
            row += [repr(tr.manipulability), repr(tr.pos_err), repr(tr.ang_err),
                    repr(tr.solve_ms), tr.status]
            writer.writerow(row)


def read_trace(path) -> list[StepTrace]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(1 for c in header if c.startswith("q") and not c.startswith("qd"))
        n_obs = sum(1 for c in header if c.startswith("clearance_"))
        traces = []
        for row in reader:
            it = iter(row)
            t = float(next(it))
            q = np.array([float(next(it)) for _ in range(n)])
            qd = np.array([float(next(it)) for _ in range(n)])
            delta = np.array([float(next(it)) for _ in range(6)])
            clear = np.array([float(next(it)) for _ in range(n_obs)])
            manip = float(next(it))
            pos_err = float(next(it))
            ang_err = float(next(it))
            solve_ms = float(next(it))
            status = next(it)
            traces.append(StepTrace(t, q, qd, delta, clear, manip, pos_err,
                                    ang_err, solve_ms, status))
    return traces
