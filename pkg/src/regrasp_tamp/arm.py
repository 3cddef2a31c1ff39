"""Planar 3R arm with a parallel gripper.

The end-effector frame sits at the palm front, x pointing along the fingers
(the approach direction) and y along the pinch axis. Finger pads span
``[0, finger_length]`` in x, so a grasp centre is ``finger_length / 2`` ahead
of the end-effector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .geom import GEOM_EPS, ConvexPolygon, Pose2, Shape2, box_shape, compose, inverse, wrap_angle

JointConfig = np.ndarray  # shape (3,), radians

DEFAULT_CONTINUITY = 0.5
DEFAULT_CART_STEP = 0.01
DEFAULT_ANGLE_STEP = 0.02


@dataclass(frozen=True, eq=False)
class GripperModel:
    finger_length: float = 0.04
    finger_width: float = 0.008
    max_aperture: float = 0.08
    grip_force: float = 100.0
    palm_shape: Optional[Shape2] = None

    def __post_init__(self):
        if self.max_aperture <= 0:
            raise ValueError("max_aperture must be positive")
        if self.grip_force <= 0:
            raise ValueError("grip_force must be positive")
        if self.palm_shape is None:
            half = 0.5 * self.max_aperture + self.finger_width
            object.__setattr__(self, "palm_shape", box_shape(0.02, 2 * half, x0=-0.02, y0=-half, name="palm"))

    @property
    def center_offset(self) -> float:
        """Distance from the end-effector to the grasp centre along the approach axis."""
        return 0.5 * self.finger_length

    def finger_boxes(self, aperture: float) -> list[np.ndarray]:
        if self.finger_length <= 0 or self.finger_width <= 0:
            raise ValueError("finger dimensions must be positive")
        h = 0.5 * aperture
        fl, fw = self.finger_length, self.finger_width
        return [
            np.array([[0.0, h], [fl, h], [fl, h + fw], [0.0, h + fw]]),
            np.array([[0.0, -h - fw], [fl, -h - fw], [fl, -h], [0.0, -h]]),
        ]


@dataclass(frozen=True, eq=False)
class ArmModel:
    base: Pose2 = field(default_factory=lambda: Pose2(0.0, 0.25, 0.0))
    link_lengths: tuple[float, float, float] = (0.40, 0.35, 0.10)
    link_widths: tuple[float, float, float] = (0.03, 0.025, 0.02)
    joint_limits: tuple[tuple[float, float], ...] = ((-math.pi, math.pi), (-2.9, 2.9), (-math.pi, math.pi))
    gripper: GripperModel = field(default_factory=GripperModel)

    def __post_init__(self):
        if len(self.link_lengths) != 3 or len(self.link_widths) != 3 or len(self.joint_limits) != 3:
            raise ValueError("3R arm needs three links and three joint limits")
        if any(l <= 0 for l in self.link_lengths):
            raise ValueError("link lengths must be positive")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError("joint limits must be well-ordered")
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(self, "link_widths", tuple(float(v) for v in self.link_widths))
        object.__setattr__(self, "joint_limits", tuple((float(a), float(b)) for a, b in self.joint_limits))

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.joint_limits])

    @property
    def reach(self) -> float:
        return sum(self.link_lengths)

    def within_limits(self, q, tol: float = 1e-12) -> bool:
        return all(lo - tol <= v <= hi + tol for v, (lo, hi) in zip(q, self.joint_limits))

    def sweep_radii(self, extra: float = 0.0) -> np.ndarray:
        """Upper bounds on the lever arm of each joint over the arm body."""
        l1, l2, l3 = self.link_lengths
        tip = self.gripper.finger_length + 0.5 * self.gripper.max_aperture + self.gripper.finger_width + extra
        return np.array([l1 + l2 + l3 + tip, l2 + l3 + tip, l3 + tip])


@dataclass
class Trajectory:
    waypoints: np.ndarray
    manifold: object = None

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.waypoints.shape[0] == 0 or self.waypoints.shape[1] != 3:
            raise ValueError("trajectory needs at least one 3-joint waypoint")

    def __len__(self) -> int:
        return self.waypoints.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def reversed(self) -> "Trajectory":
        return Trajectory(self.waypoints[::-1].copy(), self.manifold)

    def max_step(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.waypoints, axis=0))))


def joint_distance(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def link_frames(arm: ArmModel, q) -> list[Pose2]:
    """Frames at joints 1..3 followed by the end-effector frame."""
    frames = []
    p = compose(arm.base, Pose2(0.0, 0.0, q[0]))
    frames.append(p)
    p = compose(p, Pose2(arm.link_lengths[0], 0.0, q[1]))
    frames.append(p)
    p = compose(p, Pose2(arm.link_lengths[1], 0.0, q[2]))
    frames.append(p)
    frames.append(compose(p, Pose2(arm.link_lengths[2], 0.0, 0.0)))
    return frames


def forward_kinematics(arm: ArmModel, q) -> Pose2:
    l1, l2, l3 = arm.link_lengths
    a1 = arm.base.theta + q[0]
    a2 = a1 + q[1]
    a3 = a2 + q[2]
    x = arm.base.x + l1 * math.cos(a1) + l2 * math.cos(a2) + l3 * math.cos(a3)
    y = arm.base.y + l1 * math.sin(a1) + l2 * math.sin(a2) + l3 * math.sin(a3)
    return Pose2(x, y, a3)


def inverse_kinematics(arm: ArmModel, target: Pose2) -> list[np.ndarray]:
    """All joint solutions (elbow branches) reaching ``target`` within limits."""
    local = compose(inverse(arm.base), target)
    l1, l2, l3 = arm.link_lengths
    wx = local.x - l3 * math.cos(local.theta)
    wy = local.y - l3 * math.sin(local.theta)
    c2 = (wx * wx + wy * wy - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if c2 > 1.0 + 1e-12 or c2 < -1.0 - 1e-12:
        return []
    c2 = min(1.0, max(-1.0, c2))
    s2_mag = math.sqrt(max(0.0, 1.0 - c2 * c2))
    sols: list[np.ndarray] = []
    for s2 in (s2_mag, -s2_mag):
        t2 = math.atan2(s2, c2)
        t1 = math.atan2(wy, wx) - math.atan2(l2 * s2, l1 + l2 * c2)
        t3 = local.theta - t1 - t2
        q = np.array([wrap_angle(t1), wrap_angle(t2), wrap_angle(t3)])
        if not arm.within_limits(q):
            continue
        if any(joint_distance(q, other) <= 1e-9 for other in sols):
            continue
        sols.append(q)
    return sols


def nearest_solution(solutions: Sequence[np.ndarray], ref) -> Optional[np.ndarray]:
    if not solutions:
        return None
    ref = np.asarray(ref, dtype=float)
    return min(solutions, key=lambda s: float(np.max(np.abs(s - ref))))


def _transform(local: np.ndarray, frame: Pose2) -> np.ndarray:
    c, s = math.cos(frame.theta), math.sin(frame.theta)
    return np.ascontiguousarray(local @ np.array([[c, s], [-s, c]]) + np.array([frame.x, frame.y]))


def arm_world_parts(arm: ArmModel, q, aperture: float) -> list[np.ndarray]:
    """World-frame polygons of the links, palm and the two fingers."""
    if any(w <= 0 for w in arm.link_widths):
        raise ValueError("link widths must be positive")
    if not 0.0 <= aperture <= arm.gripper.max_aperture + 1e-12:
        raise ValueError("aperture outside [0, max_aperture]")
    frames = link_frames(arm, q)
    parts = []
    for i in range(3):
        l, h = arm.link_lengths[i], 0.5 * arm.link_widths[i]
        parts.append(_transform(np.array([[0.0, -h], [l, -h], [l, h], [0.0, h]]), frames[i]))
    ee = frames[3]
    for p in arm.gripper.palm_shape.parts:
        parts.append(_transform(p.array, ee))
    for f in arm.gripper.finger_boxes(aperture):
        parts.append(_transform(f, ee))
    return parts


def arm_shape(arm: ArmModel, q, aperture: float) -> Shape2:
    parts = arm_world_parts(arm, q, aperture)
    return Shape2(tuple(ConvexPolygon(tuple(map(tuple, p))) for p in parts), 1.0, "arm")


@dataclass
class CollisionChecker:
    """Arm (and optionally a carried object) against static world polygons.

    ``carried`` is ``(shape, object_frame_pose)`` where the pose is the
    end-effector pose in the object's frame. ``carried_obstacles`` defaults to
    ``obstacles``; pass a subset to let the object rest on a support.
    """

    arm: ArmModel
    obstacles: list
    aperture: float
    carried: Optional[tuple] = None
    carried_obstacles: Optional[list] = None
    margin: float = 0.0
    calls: int = 0

    def __post_init__(self):
        if self.carried_obstacles is None:
            self.carried_obstacles = self.obstacles
        if self.carried is not None:
            self._ee_to_object = inverse(self.carried[1])

    def object_pose(self, q) -> Optional[Pose2]:
        if self.carried is None:
            return None
        return compose(forward_kinematics(self.arm, q), self._ee_to_object)

    def __call__(self, q) -> bool:
        self.calls += 1
        if kernels.parts_collide(arm_world_parts(self.arm, q, self.aperture), self.obstacles, self.margin, GEOM_EPS):
            return True
        if self.carried is not None and self.carried_obstacles:
            parts = self.carried[0].world_parts(self.object_pose(q))
            if kernels.parts_collide(parts, self.carried_obstacles, self.margin, GEOM_EPS):
                return True
        return False


def plan_cartesian(
    arm: ArmModel,
    start,
    goal_pose: Pose2,
    checker: Optional[Callable] = None,
    *,
    step: float = DEFAULT_CART_STEP,
    angle_step: float = DEFAULT_ANGLE_STEP,
    continuity: float = DEFAULT_CONTINUITY,
    manifold=None,
) -> Optional[Trajectory]:
    """Straight-line end-effector motion from ``FK(start)`` to ``goal_pose``.

    Returns ``None`` when a step has no IK solution, the nearest IK branch
    jumps by more than ``continuity`` on any joint, or a waypoint collides.
    """
    start = np.asarray(start, dtype=float)
    p0 = forward_kinematics(arm, start)
    dx, dy = goal_pose.x - p0.x, goal_pose.y - p0.y
    dth = wrap_angle(goal_pose.theta - p0.theta)
    n = int(math.ceil(max(math.hypot(dx, dy) / step, abs(dth) / angle_step) - 1e-12))
    if checker is not None and checker(start):
        return None
    waypoints = [start]
    prev = start
    for i in range(1, n + 1):
        t = i / n
        pose = goal_pose if i == n else Pose2(p0.x + t * dx, p0.y + t * dy, p0.theta + t * dth)
        q = nearest_solution(inverse_kinematics(arm, pose), prev)
        if q is None or joint_distance(q, prev) > continuity:
            return None
        if checker is not None and checker(q):
            return None
        waypoints.append(q)
        prev = q
    return Trajectory(np.array(waypoints), manifold)
