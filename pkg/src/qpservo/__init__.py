"""Reactive QP motion control for serial-link manipulators.

Servos an end-effector to a goal pose by solving a small strictly convex
quadratic program every control step, dodging moving obstacles with
velocity dampers, respecting joint position/velocity limits, and climbing
the manipulability gradient along the way.
"""

from .collision import DamperRow, DistanceWitness, Obstacle
from .controller import ControlStep, ControllerParams, LambdaDeltaMode
from .kinematics import JointSpec, LinkShape, RobotModel, load_robot_model
from .models import panda, PANDA_READY
from .qp import QPProblem, QPSolution
from .se3 import Pose, Twist, pose_error_twist
from .sim import Outcome, Scenario, StepTrace, load_scenario, run, summarize

__version__ = "0.1.0"

__all__ = [
    "ControlStep",
    "ControllerParams",
    "DamperRow",
    "DistanceWitness",
    "JointSpec",
    "LambdaDeltaMode",
    "LinkShape",
    "Obstacle",
    "Outcome",
    "PANDA_READY",
    "Pose",
    "QPProblem",
    "QPSolution",
    "RobotModel",
    "Scenario",
    "StepTrace",
    "Twist",
    "load_robot_model",
    "load_scenario",
    "panda",
    "pose_error_twist",
    "run",
    "summarize",
]
