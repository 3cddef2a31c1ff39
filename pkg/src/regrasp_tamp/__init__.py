"""Planar slide-and-regrasp task and motion planning over foliated manifolds."""

from .kernels import BACKEND
from .planner import PlanResult, PlanStatus, StabilityReport, execute, plan, plan_baseline
from .scene import Params, Scene, Table
from .scenes import generate_scene_suite, hammer_scene

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Params",
    "PlanResult",
    "PlanStatus",
    "Scene",
    "StabilityReport",
    "Table",
    "execute",
    "generate_scene_suite",
    "hammer_scene",
    "plan",
    "plan_baseline",
]
