"""Standalone SVG frames of a plan: table, obstacles, arm, gripper, object and COM."""

from __future__ import annotations

import math
import os
from typing import Iterator
from xml.sax.saxutils import escape

import numpy as np

from .arm import arm_world_parts, forward_kinematics
from .foliation import ManifoldKind, TransitionKind
from .geom import Pose2, centroid_and_mass, compose, inverse
from .planner import PlanResult, Segment
from .scene import Scene
from .sceneio import atomic_write

WIDTH, HEIGHT = 800, 500


def timeline(result: PlanResult) -> Iterator[tuple[np.ndarray, Segment]]:
    """Spliced waypoints, each with the segment it belongs to."""
    for i, seg in enumerate(result.segments):
        wps = seg.trajectory.waypoints
        for j, q in enumerate(wps):
            if i > 0 and j == 0:
                continue
            yield q, seg


def frame_count(n_waypoints: int, stride: int) -> int:
    return int(math.ceil(n_waypoints / stride))


def _object_pose(scene: Scene, result: PlanResult, seg: Segment, q, resting: Pose2) -> Pose2:
    held = seg.manifold.kind is not ManifoldKind.REGRASP and seg.kind not in (
        TransitionKind.RELEASE.value, TransitionKind.APPROACH.value)
    if held and seg.grasp is not None:
        g = result.grasps[seg.grasp][0]
        return compose(forward_kinematics(scene.arm, q), inverse(g.object_frame_pose))
    return resting


class _Canvas:
    def __init__(self, scene: Scene):
        t = scene.table
        b = scene.arm.base
        reach = scene.arm.reach
        self.x0 = min(t.x_min, b.x - reach) - 0.05
        self.x1 = max(t.x_max, b.x + reach) + 0.05
        self.y0 = t.height - t.thickness - 0.05
        self.scale = min(WIDTH / (self.x1 - self.x0), HEIGHT / (b.y + reach + 0.05 - self.y0))
        self.items: list[str] = []

    def pt(self, x, y) -> str:
        return f"{(x - self.x0) * self.scale:.2f},{HEIGHT - (y - self.y0) * self.scale:.2f}"

    def poly(self, verts, fill: str, stroke: str = "#222", opacity: float = 1.0) -> None:
        pts = " ".join(self.pt(x, y) for x, y in verts)
        self.items.append(f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" stroke-width="1" '
                          f'fill-opacity="{opacity:g}"/>')

    def circle(self, x, y, r_px, fill) -> None:
        cx, cy = self.pt(x, y).split(",")
        self.items.append(f'<circle cx="{cx}" cy="{cy}" r="{r_px}" fill="{fill}"/>')

    def text(self, x_px, y_px, s) -> None:
        self.items.append(f'<text x="{x_px}" y="{y_px}" font-family="monospace" font-size="14">{escape(s)}</text>')

    def svg(self) -> str:
        body = "\n".join(self.items)
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def render_frame(scene: Scene, result: PlanResult, q, seg: Segment, obj_pose: Pose2, label: str = "") -> str:
    c = _Canvas(scene)
    c.poly(scene.table.polygon(), "#c8a165")
    for ob in scene.obstacles:
        for p in ob.world_parts():
            c.poly(p, "#888888")
    for p in scene.target.world_parts(obj_pose):
        c.poly(p, "#4a90d9", opacity=0.85)
    com, _ = centroid_and_mass(scene.target)
    c.circle(*obj_pose.apply_point(*com), 4, "#d0021b")
    held = seg.grasp is not None and seg.manifold.kind is not ManifoldKind.REGRASP
    ap = scene.arm.gripper.max_aperture
    if held and seg.kind not in (TransitionKind.APPROACH.value, TransitionKind.RELEASE.value):
        ap = min(result.grasps[seg.grasp][0].width, ap)
    for p in arm_world_parts(scene.arm, q, ap):
        c.poly(p, "#f5a623", opacity=0.9)
    c.text(10, 20, f"{seg.manifold} {seg.kind}")
    if label:
        c.text(10, 40, label)
    return c.svg()


def render_plan(scene: Scene, result: PlanResult, out_dir: str, stride: int = 10) -> list[str]:
    """Write one SVG per ``stride`` waypoints; returns the file paths."""
    if not result.solved:
        raise ValueError(f"refusing to render an unsolved plan ({result.status.value})")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    resting = scene.start_placement
    for i, (q, seg) in enumerate(timeline(result)):
        if seg.kind == TransitionKind.RELEASE.value and seg.placement is not None:
            resting = result.placements[seg.placement]
        pose = _object_pose(scene, result, seg, q, resting)
        if i % stride:
            continue
        path = os.path.join(out_dir, f"frame_{len(paths):04d}.svg")
        atomic_write(path, render_frame(scene, result, q, seg, pose, f"waypoint {i}"))
        paths.append(path)
    return paths
