"""Scene description: table, arm, obstacles, target object and parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .arm import ArmModel
from .geom import ConvexPolygon, Pose2, Shape2


@dataclass(frozen=True)
class Params:
    """Tunable defaults shared by every planning stage."""

    # geometry / kinematics
    collision_margin: float = 0.0
    cart_step: float = 0.01
    angle_step: float = 0.02
    continuity_bound: float = 0.5
    # grasp analysis
    cone_half_angle: float = math.radians(15.0)
    grasp_spacing: float = 0.01
    torsional_mu: float = 0.3
    patch_radius: float = 0.01
    threshold_factor: float = 0.8
    stability_eps: float = 0.01
    com_noise_sigma: float = 0.0
    # foliation
    n_placements: int = 8
    placement_clearance: float = 0.005
    min_separation: float = 0.02
    pregrasp_offset: float = 0.05
    lift_height: float = 0.10
    transfer_clearance: float = 0.05
    # task planner
    gamma: float = 0.95
    r_target: float = 100.0
    r_step: float = -1.0
    r_failure: float = -100.0
    vi_tol: float = 1e-9
    vi_max_iters: int = 5000
    decay: float = 0.2
    decay_similar: float = 0.2
    # motion planner
    n_samples: int = 300
    k_neighbors: int = 8
    projection_tol: float = 1e-6
    retry_factor: int = 10
    validation_budget: int = 5000
    # orchestration
    episode_budget: int = 30
    execution_replans: int = 5

    def with_overrides(self, **kw) -> "Params":
        known = {f.name for f in fields(self)}
        unknown = set(kw) - known
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        return replace(self, **kw)


@dataclass(frozen=True)
class Table:
    x_min: float = 0.15
    x_max: float = 0.95
    height: float = 0.0
    thickness: float = 0.05

    def polygon(self) -> np.ndarray:
        return ConvexPolygon.box(self.x_min, self.height - self.thickness, self.x_max, self.height).array


@dataclass(frozen=True, eq=False)
class Obstacle:
    shape: Shape2
    pose: Pose2

    def world_parts(self) -> list[np.ndarray]:
        return self.shape.world_parts(self.pose)


DEFAULT_Q_INIT = (1.2, -1.9, -0.6)


@dataclass(frozen=True, eq=False)
class Scene:
    table: Table
    arm: ArmModel
    obstacles: tuple[Obstacle, ...]
    target: Shape2
    start_placement: Pose2
    goal_placement: Pose2
    params: Params = field(default_factory=Params)
    seed: int = 0
    q_init: tuple[float, float, float] = DEFAULT_Q_INIT
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "q_init", tuple(float(v) for v in self.q_init))

    def obstacle_parts(self) -> list[np.ndarray]:
        parts: list[np.ndarray] = []
        for ob in self.obstacles:
            parts.extend(ob.world_parts())
        return parts

    def table_parts(self) -> list[np.ndarray]:
        return [self.table.polygon()]

    def static_parts(self) -> list[np.ndarray]:
        return self.table_parts() + self.obstacle_parts()

    def resting_pose(self, x: float, theta: Optional[float] = None) -> Pose2:
        """Object pose at horizontal position x with its lowest point on the table."""
        th = self.start_placement.theta if theta is None else theta
        return Pose2(x, self.table.height - self.target.bottom_offset(th), th)

    def lifted(self, placement: Pose2, height: Optional[float] = None) -> Pose2:
        h = self.params.lift_height if height is None else height
        return Pose2(placement.x, placement.y + h, placement.theta)

    def with_params(self, **kw) -> "Scene":
        return replace(self, params=self.params.with_overrides(**kw))

    def replace(self, **kw) -> "Scene":
        return replace(self, **kw)
