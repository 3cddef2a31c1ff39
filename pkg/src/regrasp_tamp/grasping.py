"""Antipodal grasp sampling, COM estimation and torque-based grasp quality."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .arm import GripperModel
from .geom import GEOM_EPS, Pose2, Shape2, centroid_and_mass, wrap_angle

GRAVITY = 9.81

DEFAULT_CONE_HALF_ANGLE = math.radians(15.0)
DEFAULT_TORSIONAL_MU = 0.3
DEFAULT_PATCH_RADIUS = 0.01
DEFAULT_THRESHOLD_FACTOR = 0.8
DEFAULT_STABILITY_EPS = 0.01


class QualityLabel(str, enum.Enum):
    HIGH = "HighQuality"
    LOW = "LowQuality"


@dataclass(frozen=True)
class Grasp:
    id: int
    object_frame_pose: Pose2  # end-effector pose in the object frame
    contact_a: tuple[float, float]
    contact_b: tuple[float, float]
    width: float
    pinch_normal: tuple[float, float]

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.contact_a[0] + self.contact_b[0]), 0.5 * (self.contact_a[1] + self.contact_b[1]))


@dataclass(frozen=True)
class GraspQuality:
    torque: float
    label: QualityLabel

    @property
    def high(self) -> bool:
        return self.label is QualityLabel.HIGH


@dataclass(frozen=True)
class ComEstimate:
    point: tuple[float, float]
    mass: float


def _ray_interval(part, origin, d):
    """Parameter interval of ``origin + t d`` inside a convex part, with exit normal."""
    t_in, t_out = -math.inf, math.inf
    exit_normal = None
    for a, _, n in part.edges():
        denom = n[0] * d[0] + n[1] * d[1]
        dist = n[0] * (origin[0] - a[0]) + n[1] * (origin[1] - a[1])
        if abs(denom) < 1e-15:
            if dist > GEOM_EPS:
                return None
            continue
        t = -dist / denom
        if denom > 0:
            if t < t_out:
                t_out, exit_normal = t, n
        elif t > t_in:
            t_in = t
    if t_out <= t_in + 1e-12:
        return None
    return t_in, t_out, exit_normal


def _exit_along(shape: Shape2, origin, d):
    """First point where the ray leaves the union of parts, or None."""
    spans = []
    for part in shape.parts:
        iv = _ray_interval(part, origin, d)
        if iv is not None and iv[1] > 1e-12:
            spans.append(iv)
    if not spans:
        return None
    spans.sort(key=lambda s: s[0])
    end, normal = 0.0, None
    started = False
    for t_in, t_out, n in spans:
        if t_in > end + 1e-9:
            if started:
                break
            return None
        if t_out > end:
            end, normal = t_out, n
            started = True
    return (end, normal) if started else None


def _boundary_samples(shape: Shape2, spacing: float):
    for part in shape.parts:
        for a, b, n in part.edges():
            length = math.dist(a, b)
            count = max(1, int(round(length / spacing)))
            for k in range(count):
                t = (k + 0.5) / count
                p = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
                outside = (p[0] + 1e-7 * n[0], p[1] + 1e-7 * n[1])
                if any(q.contains(outside, strict=False) for q in shape.parts):
                    continue  # internal seam between parts
                yield p, n


def _gripper_clear(shape: Shape2, gripper: GripperModel, ee: Pose2) -> bool:
    parts = [np.ascontiguousarray(ee.apply(p.array)) for p in gripper.palm_shape.parts]
    parts += [np.ascontiguousarray(ee.apply(f)) for f in gripper.finger_boxes(gripper.max_aperture)]
    return not kernels.parts_collide(parts, shape.world_parts(Pose2()), 0.0, GEOM_EPS)


def sample_grasps(
    obj: Shape2,
    gripper: GripperModel,
    cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE,
    spacing: float = 0.01,
    check_gripper: bool = True,
) -> list[Grasp]:
    """Two-finger antipodal grasps from inward ray casts off the object boundary.

    Each antipodal pair yields up to two grasps (one per approach side);
    with ``check_gripper`` the open gripper must not overlap the object.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    cos_cone = math.cos(cone_half_angle)
    grasps: list[Grasp] = []
    seen: set = set()
    for p, n in _boundary_samples(obj, spacing):
        d = (-n[0], -n[1])
        hit = _exit_along(obj, p, d)
        if hit is None:
            continue
        width, m = hit
        if width <= GEOM_EPS or width > gripper.max_aperture + 1e-12:
            continue
        if m[0] * d[0] + m[1] * d[1] < cos_cone:
            continue
        other = (p[0] + width * d[0], p[1] + width * d[1])
        center = (0.5 * (p[0] + other[0]), 0.5 * (p[1] + other[1]))
        for heading in ((-n[1], n[0]), (n[1], -n[0])):
            theta = math.atan2(heading[1], heading[0])
            key = (round(center[0], 9), round(center[1], 9), round(wrap_angle(theta), 9))
            if key in seen:
                continue
            seen.add(key)
            ee = Pose2(center[0] - heading[0] * gripper.center_offset, center[1] - heading[1] * gripper.center_offset, theta)
            if check_gripper and not _gripper_clear(obj, gripper, ee):
                continue
            grasps.append(Grasp(len(grasps), ee, p, other, width, n))
    return grasps


def estimate_com(obj: Shape2, noise_sigma: float = 0.0, seed=None) -> ComEstimate:
    """Analytic centroid, optionally perturbed by seeded isotropic noise."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    (cx, cy), mass = centroid_and_mass(obj)
    if noise_sigma > 0:
        offset = np.random.default_rng(seed).normal(0.0, noise_sigma, size=2)
        x0, y0, x1, y1 = obj.local_bounds
        cx = min(x1, max(x0, cx + float(offset[0])))
        cy = min(y1, max(y0, cy + float(offset[1])))
    return ComEstimate((cx, cy), mass)


def com_offset(g: Grasp, com: ComEstimate, carry_orientation: float = 0.0) -> tuple[float, float]:
    """World-aligned vector from grasp centre to COM with the object at ``carry_orientation``."""
    gx, gy = g.center
    ox, oy = com.point[0] - gx, com.point[1] - gy
    c, s = math.cos(carry_orientation), math.sin(carry_orientation)
    return c * ox - s * oy, s * ox + c * oy


def grasp_torque(g: Grasp, com: ComEstimate, carry_orientation: float = 0.0) -> float:
    return com.mass * GRAVITY * abs(com_offset(g, com, carry_orientation)[0])


def torque_capacity(gripper: GripperModel, torsional_mu: float = DEFAULT_TORSIONAL_MU,
                    patch_radius: float = DEFAULT_PATCH_RADIUS) -> float:
    return torsional_mu * gripper.grip_force * patch_radius


def torque_threshold(gripper: GripperModel, torsional_mu: float = DEFAULT_TORSIONAL_MU,
                     patch_radius: float = DEFAULT_PATCH_RADIUS,
                     factor: float = DEFAULT_THRESHOLD_FACTOR) -> float:
    return factor * torque_capacity(gripper, torsional_mu, patch_radius)


def classify(grasps: Sequence[Grasp], com: ComEstimate, threshold: float,
             carry_orientation: float = 0.0) -> list[tuple[Grasp, GraspQuality]]:
    """Label grasps by gravitational torque, sorted ascending (ties by id)."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    rated = []
    for g in grasps:
        tau = grasp_torque(g, com, carry_orientation)
        label = QualityLabel.HIGH if tau <= threshold else QualityLabel.LOW
        rated.append((g, GraspQuality(tau, label)))
    rated.sort(key=lambda gq: (gq[1].torque, gq[0].id))
    return rated


def lift_rotation(
    g: Grasp,
    com: ComEstimate,
    gripper: GripperModel,
    torsional_mu: float = DEFAULT_TORSIONAL_MU,
    patch_radius: float = DEFAULT_PATCH_RADIUS,
    carry_orientation: float = 0.0,
) -> float:
    """Quasi-static slip angle after lifting.

    Friction holds while the gravitational torque stays within the torsional
    capacity; otherwise the object pivots about the grasp centre until the COM
    hangs straight below it.
    """
    if torsional_mu <= 0 or patch_radius <= 0:
        raise ValueError("friction parameters must be positive")
    ox, oy = com_offset(g, com, carry_orientation)
    return slip_angle(ox, oy, com.mass, torque_capacity(gripper, torsional_mu, patch_radius))


def slip_angle(ox: float, oy: float, mass: float, capacity: float) -> float:
    """Pivot angle for a world COM offset ``(ox, oy)`` from the grasp centre."""
    if mass * GRAVITY * abs(ox) <= capacity or math.hypot(ox, oy) <= GEOM_EPS:
        return 0.0
    return math.atan2(abs(ox), -oy)


def pivot_direction(g: Grasp, com: ComEstimate, carry_orientation: float = 0.0) -> float:
    """Sign of the in-plane slip rotation (+1 counter-clockwise)."""
    ox, _ = com_offset(g, com, carry_orientation)
    return -1.0 if ox > 0 else 1.0


def stability_score(delta_r: float, eps: float = DEFAULT_STABILITY_EPS) -> float:
    return 1.0 / max(delta_r, eps)
