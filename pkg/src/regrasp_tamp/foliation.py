"""Three-foliation scene model: re-grasp, slide and transfer manifolds.

Placements parameterise the re-grasp foliation; grasps parameterise slide
(every grasp) and transfer (high-quality grasps only). Transitions between
manifolds are pre-computed Cartesian trajectories: approach/release between
re-grasp and slide, and lift from slide to transfer.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .arm import CollisionChecker, Trajectory, inverse_kinematics, plan_cartesian
from .geom import GEOM_EPS, ConvexPolygon, Pose2, Shape2, compose
from .grasping import Grasp, GraspQuality
from .scene import Scene

log = logging.getLogger(__name__)


class ManifoldKind(str, enum.Enum):
    REGRASP = "ReGrasp"
    SLIDE = "Slide"
    TRANSFER = "Transfer"


@dataclass(frozen=True, order=True)
class ManifoldId:
    kind: ManifoldKind
    co_param: int  # placement index for REGRASP, grasp id otherwise

    def __str__(self) -> str:
        return f"{self.kind.value}({self.co_param})"


class TransitionKind(str, enum.Enum):
    APPROACH = "approach"
    RELEASE = "release"
    LIFT = "lift"


@dataclass
class TransitionSample:
    id: int
    kind: TransitionKind
    source: ManifoldId
    target: ManifoldId
    trajectory: Trajectory
    placement: int
    grasp: int
    twin: Optional[int] = None  # mirrored approach/release partner

    @property
    def start_config(self) -> np.ndarray:
        return self.trajectory.start

    @property
    def end_config(self) -> np.ndarray:
        return self.trajectory.end


class NoHighQualityGraspAnywhere(RuntimeError):
    """No transfer manifold exists, so no lift is ever allowed."""


@dataclass
class FoliationModel:
    placements: list[Pose2]
    grasps: list[tuple[Grasp, GraspQuality]]
    manifolds: list[ManifoldId]
    transitions: list[TransitionSample] = field(default_factory=list)

    def __post_init__(self):
        self._by_id = {g.id: (g, q) for g, q in self.grasps}

    def grasp(self, gid: int) -> Grasp:
        return self._by_id[gid][0]

    def quality(self, gid: int) -> GraspQuality:
        return self._by_id[gid][1]

    def high_quality(self) -> list[Grasp]:
        return [g for g, q in self.grasps if q.high]

    def count(self, kind: ManifoldKind) -> int:
        return sum(1 for m in self.manifolds if m.kind is kind)


def _inflated_box(obj: Shape2, pose: Pose2, clearance: float) -> np.ndarray:
    x0, y0, x1, y1 = obj.world_bounds(pose)
    return ConvexPolygon.box(x0 - clearance, y0 - clearance, x1 + clearance, y1 + clearance).array


def placement_is_free(scene: Scene, obj: Shape2, pose: Pose2, clearance: float) -> bool:
    return not kernels.parts_collide([_inflated_box(obj, pose, clearance)], scene.obstacle_parts(), 0.0, GEOM_EPS)


def sample_placements(scene: Scene, obj: Shape2, count: int, seed=None) -> list[Pose2]:
    """Collision-free resting placements along the table; the start comes first."""
    if count <= 0:
        raise ValueError("count must be positive")
    p = scene.params
    start = scene.start_placement
    probe = scene.resting_pose(0.0, start.theta)
    bx0, _, bx1, _ = obj.world_bounds(probe)
    lo, hi = scene.table.x_min - bx0, scene.table.x_max - bx1
    out = [start]
    if hi < lo:
        return out
    rng = np.random.default_rng(seed)
    attempts = 0
    while len(out) < count + 1 and attempts < 50 * count:
        attempts += 1
        x = float(rng.uniform(lo, hi))
        if any(abs(x - q.x) < p.min_separation for q in out):
            continue
        pose = scene.resting_pose(x, start.theta)
        if placement_is_free(scene, obj, pose, p.placement_clearance):
            out.append(pose)
    return out


def build_foliation(grasps: Sequence[tuple[Grasp, GraspQuality]], placements: Sequence[Pose2]) -> FoliationModel:
    if not placements or not grasps:
        raise ValueError("need at least one placement and one grasp")
    manifolds = [ManifoldId(ManifoldKind.REGRASP, i) for i in range(len(placements))]
    manifolds += [ManifoldId(ManifoldKind.SLIDE, g.id) for g, _ in grasps]
    manifolds += [ManifoldId(ManifoldKind.TRANSFER, g.id) for g, q in grasps if q.high]
    if not any(q.high for _, q in grasps):
        raise NoHighQualityGraspAnywhere("no high-quality grasp defines a transfer manifold")
    return FoliationModel(list(placements), list(grasps), manifolds)


def _gripper_parts(scene: Scene, ee: Pose2, aperture: float) -> list[np.ndarray]:
    grip = scene.arm.gripper
    parts = [np.ascontiguousarray(ee.apply(p.array)) for p in grip.palm_shape.parts]
    parts += [np.ascontiguousarray(ee.apply(f)) for f in grip.finger_boxes(aperture)]
    return parts


def sample_pair(scene: Scene, obj: Shape2, placement: Pose2, grasp: Grasp, high: bool,
                pregrasp_offset: float, lift_height: float):
    """Release/approach/lift trajectories for one (placement, grasp) pair.

    Yields ``(config, release, lift_or_None)`` for each IK branch whose
    release succeeds.
    """
    p = scene.params
    arm = scene.arm
    ee = compose(placement, grasp.object_frame_pose)
    static = scene.static_parts()
    object_parts = obj.world_parts(placement)
    if kernels.parts_collide(_gripper_parts(scene, ee, arm.gripper.max_aperture), static, p.collision_margin, GEOM_EPS):
        return
    open_checker = CollisionChecker(arm, static + object_parts, arm.gripper.max_aperture, margin=p.collision_margin)
    carry_checker = CollisionChecker(arm, static, min(grasp.width, arm.gripper.max_aperture),
                                     carried=(obj, grasp.object_frame_pose), margin=p.collision_margin)
    pre = compose(ee, Pose2(-pregrasp_offset, 0.0, 0.0))
    up = Pose2(ee.x, ee.y + lift_height, ee.theta)
    kw = dict(step=p.cart_step, angle_step=p.angle_step, continuity=p.continuity_bound)
    for q in inverse_kinematics(arm, ee):
        release = plan_cartesian(arm, q, pre, open_checker, **kw)
        if release is None:
            continue
        lift = plan_cartesian(arm, q, up, carry_checker, **kw) if high else None
        yield q, release, lift


def sample_transitions(model: FoliationModel, scene: Scene, obj: Optional[Shape2] = None,
                       pregrasp_offset: Optional[float] = None,
                       lift_height: Optional[float] = None) -> list[TransitionSample]:
    """Approach/release twins for every (placement, grasp, IK branch) and lifts for high-quality grasps."""
    p = scene.params
    obj = scene.target if obj is None else obj
    pregrasp_offset = p.pregrasp_offset if pregrasp_offset is None else pregrasp_offset
    lift_height = p.lift_height if lift_height is None else lift_height
    out: list[TransitionSample] = []
    for pi, placement in enumerate(model.placements):
        regrasp = ManifoldId(ManifoldKind.REGRASP, pi)
        for g, quality in model.grasps:
            slide = ManifoldId(ManifoldKind.SLIDE, g.id)
            found = False
            for _, release, lift in sample_pair(scene, obj, placement, g, quality.high, pregrasp_offset, lift_height):
                found = True
                rel = TransitionSample(len(out), TransitionKind.RELEASE, slide, regrasp,
                                       Trajectory(release.waypoints, slide), pi, g.id)
                out.append(rel)
                app = TransitionSample(len(out), TransitionKind.APPROACH, regrasp, slide,
                                       Trajectory(release.waypoints[::-1].copy(), regrasp), pi, g.id, twin=rel.id)
                rel.twin = app.id
                out.append(app)
                if lift is not None:
                    transfer = ManifoldId(ManifoldKind.TRANSFER, g.id)
                    out.append(TransitionSample(len(out), TransitionKind.LIFT, slide, transfer,
                                                Trajectory(lift.waypoints, slide), pi, g.id))
            if not found:
                log.debug("no transition for placement %d grasp %d", pi, g.id)
    return out
