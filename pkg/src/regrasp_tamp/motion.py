"""Constraint-aware lazy PRM with analytic projection onto each manifold.

Slide keeps the grasped object on the table at its resting orientation;
transfer keeps the carry orientation and a minimum clearance above the
table; re-grasp is unconstrained (the resting object is an obstacle).
Projection snaps the object pose onto the constraint and re-solves IK on the
branch nearest the input configuration.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .arm import ArmModel, CollisionChecker, Trajectory, forward_kinematics, inverse_kinematics, nearest_solution
from .foliation import FoliationModel, ManifoldId, ManifoldKind
from .geom import Pose2, Shape2, compose, inverse, wrap_angle
from .scene import Scene


class RoadmapEmpty(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ManifoldConstraint:
    kind: ManifoldKind
    arm: ArmModel
    table_height: float = 0.0
    shape: Optional[Shape2] = None
    grasp_pose: Optional[Pose2] = None  # end-effector pose in the object frame
    orientation: float = 0.0  # resting (slide) or carry (transfer) orientation
    clearance: float = 0.0
    tol: float = 1e-6

    def __post_init__(self):
        if self.kind is not ManifoldKind.REGRASP and (self.shape is None or self.grasp_pose is None):
            raise ValueError("slide/transfer constraints need the object shape and grasp")
        if self.grasp_pose is not None:
            object.__setattr__(self, "_ee_to_object", inverse(self.grasp_pose))

    def object_pose(self, q) -> Pose2:
        return compose(forward_kinematics(self.arm, q), self._ee_to_object)

    def height_above_table(self, pose: Pose2) -> float:
        return pose.y + self.shape.bottom_offset(pose.theta) - self.table_height

    def residual(self, q) -> float:
        if self.kind is ManifoldKind.REGRASP:
            return 0.0
        pose = self.object_pose(q)
        tilt = abs(wrap_angle(pose.theta - self.orientation))
        height = self.height_above_table(pose)
        if self.kind is ManifoldKind.SLIDE:
            return abs(height) + tilt
        return tilt + max(0.0, self.clearance - height)

    def project(self, q) -> Optional[np.ndarray]:
        q = np.asarray(q, dtype=float)
        if self.kind is ManifoldKind.REGRASP:
            return q.copy() if self.arm.within_limits(q) else None
        pose = self.object_pose(q)
        floor = self.table_height - self.shape.bottom_offset(self.orientation)
        if self.kind is ManifoldKind.SLIDE:
            y = floor
        else:
            y = max(pose.y, floor + self.clearance)
        ee = compose(Pose2(pose.x, y, self.orientation), self.grasp_pose)
        sol = nearest_solution(inverse_kinematics(self.arm, ee), q)
        if sol is None or self.residual(sol) >= self.tol:
            return None
        return sol


def residual(constraint: ManifoldConstraint, q) -> float:
    return constraint.residual(q)


def project(constraint: ManifoldConstraint, q) -> Optional[np.ndarray]:
    return constraint.project(q)


class EdgeState(enum.IntEnum):
    UNKNOWN = 0
    VALID = 1
    INVALID = 2


@dataclass
class MotionContext:
    """Validity test for one manifold: collisions plus an optional support span."""

    checker: Callable
    support: Optional[tuple[float, float]] = None
    sweep_radii: Optional[np.ndarray] = None
    continuity: float = 0.5
    step: float = 0.01
    constraint: Optional[ManifoldConstraint] = None

    def valid(self, q) -> bool:
        if self.support is not None:
            c = self.constraint
            x0, _, x1, _ = c.shape.world_bounds(c.object_pose(q))
            if x0 < self.support[0] - 1e-9 or x1 > self.support[1] + 1e-9:
                return False
        return not self.checker(q)


@dataclass
class Roadmap:
    nodes: np.ndarray
    neighbors: list
    seed: object = None
    edge_state: dict = field(default_factory=dict)
    edge_path: dict = field(default_factory=dict)
    node_state: dict = field(default_factory=dict)
    validations: dict = field(default_factory=dict)
    validated_edges: int = 0

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self.neighbors) // 2

    def key(self, i: int) -> bytes:
        return self.nodes[i].tobytes()


def build_roadmap(constraint: ManifoldConstraint, n_samples: int = 300, k: int = 8, seed=None,
                  retry_factor: int = 10) -> Roadmap:
    """Sample, project and k-NN-connect configurations; no collision checks yet."""
    if n_samples <= 0 or k < 1:
        raise ValueError("need n_samples > 0 and k >= 1")
    arm = constraint.arm
    rng = np.random.default_rng(seed)
    lo, hi = arm.lower, arm.upper
    nodes = []
    draws = 0
    while len(nodes) < n_samples and draws < retry_factor * n_samples:
        draws += 1
        q = constraint.project(rng.uniform(lo, hi))
        if q is not None:
            nodes.append(q)
    if not nodes:
        raise RoadmapEmpty(f"projection never succeeded for {constraint.kind.value}")
    arr = np.array(nodes)
    d = np.linalg.norm(arr[:, None, :] - arr[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    kk = min(k, len(nodes) - 1)
    adj: list[set] = [set() for _ in nodes]
    if kk > 0:
        nearest = np.argsort(d, axis=1, kind="stable")[:, :kk]
        for i, row in enumerate(nearest):
            for j in row:
                adj[i].add(int(j))
                adj[int(j)].add(i)
    return Roadmap(arr, [sorted(a) for a in adj], seed)


def _interpolate(ctx: MotionContext, a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """Projected waypoints along the joint-space segment, or None if infeasible."""
    delta = b - a
    radii = ctx.sweep_radii if ctx.sweep_radii is not None else np.ones(3)
    n = max(1, int(math.ceil(float(np.sum(np.abs(delta) * radii)) / ctx.step)))
    pts = [a]
    c = ctx.constraint
    for i in range(1, n):
        q = c.project(a + (i / n) * delta) if c is not None else a + (i / n) * delta
        if q is None or np.max(np.abs(q - pts[-1])) > ctx.continuity:
            return None
        pts.append(q)
    if np.max(np.abs(b - pts[-1])) > ctx.continuity:
        return None
    pts.append(b)
    return np.array(pts)


def _bisection_order(n: int) -> list[int]:
    order, seen = [], set()
    step = n
    while step >= 1:
        for i in range(0, n, step):
            if i not in seen:
                seen.add(i)
                order.append(i)
        step //= 2
    return order


class LazyPlanner:
    """Lazy shortest-path search over one manifold's roadmap."""

    def __init__(self, roadmap: Roadmap, ctx: MotionContext, k: int = 8):
        self.roadmap = roadmap
        self.ctx = ctx
        self.k = k

    def _node_ok(self, key: bytes, q: np.ndarray) -> bool:
        rm = self.roadmap
        if key not in rm.node_state:
            c = self.ctx.constraint
            ok = self.ctx.valid(q) and (c is None or c.residual(q) < c.tol)
            rm.node_state[key] = ok
        return rm.node_state[key]

    def _validate(self, ka: bytes, qa, kb: bytes, qb) -> bool:
        rm = self.roadmap
        ekey = (ka, kb) if ka < kb else (kb, ka)
        state = rm.edge_state.get(ekey, EdgeState.UNKNOWN)
        if state is not EdgeState.UNKNOWN:
            return state is EdgeState.VALID
        rm.validations[ekey] = rm.validations.get(ekey, 0) + 1
        rm.validated_edges += 1
        ok = self._node_ok(ka, qa) and self._node_ok(kb, qb)
        path = None
        if ok:
            lo_q, hi_q = (qa, qb) if ka < kb else (qb, qa)
            path = _interpolate(self.ctx, lo_q, hi_q)
            ok = path is not None
            if ok:
                for i in _bisection_order(len(path) - 1)[1:]:
                    if not self.ctx.valid(path[i]):
                        ok = False
                        break
        rm.edge_state[ekey] = EdgeState.VALID if ok else EdgeState.INVALID
        if ok:
            rm.edge_path[ekey] = path
        return ok

    def _edge_path(self, ka, kb) -> np.ndarray:
        if ka < kb:
            return self.roadmap.edge_path[(ka, kb)]
        return self.roadmap.edge_path[(kb, ka)][::-1]

    def query(self, start, goal, budget: int = 5000) -> tuple[Optional[Trajectory], int]:
        """Return (trajectory or None, number of edges validated by this query)."""
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        rm = self.roadmap
        if np.max(np.abs(start - goal)) <= 1e-12:
            return Trajectory(start[None, :].copy()), 0
        n = len(rm.nodes)
        s_idx, g_idx = n, n + 1
        configs = lambda i: rm.nodes[i] if i < n else (start if i == s_idx else goal)
        keys = {s_idx: start.tobytes(), g_idx: goal.tobytes()}
        key = lambda i: keys[i] if i >= n else rm.key(i)
        extra: dict[int, list[int]] = {s_idx: [g_idx], g_idx: [s_idx]}
        for t, q in ((s_idx, start), (g_idx, goal)):
            d = np.linalg.norm(rm.nodes - q, axis=1)
            for j in np.argsort(d, kind="stable")[: self.k]:
                extra[t].append(int(j))
                extra.setdefault(int(j), []).append(t)

        def nbrs(i):
            base = rm.neighbors[i] if i < n else []
            return list(base) + extra.get(i, [])

        def blocked(i, j):
            ka, kb = key(i), key(j)
            ekey = (ka, kb) if ka < kb else (kb, ka)
            return rm.edge_state.get(ekey, EdgeState.UNKNOWN) is EdgeState.INVALID

        used = 0
        while True:
            path = self._shortest(s_idx, g_idx, nbrs, blocked, configs)
            if path is None:
                return None, used
            all_valid = True
            for i, j in zip(path, path[1:]):
                ka, kb = key(i), key(j)
                ekey = (ka, kb) if ka < kb else (kb, ka)
                if rm.edge_state.get(ekey, EdgeState.UNKNOWN) is EdgeState.UNKNOWN:
                    if used >= budget:
                        return None, used
                    used += 1
                if not self._validate(ka, configs(i), kb, configs(j)):
                    all_valid = False
                    break
            if all_valid:
                segs = [self._edge_path(key(i), key(j)) for i, j in zip(path, path[1:])]
                wps = np.concatenate([segs[0]] + [s[1:] for s in segs[1:]], axis=0)
                wps[0], wps[-1] = start, goal
                return Trajectory(wps), used

    @staticmethod
    def _shortest(s, g, nbrs, blocked, configs):
        goal_q = configs(g)
        h = lambda i: float(np.linalg.norm(configs(i) - goal_q))
        dist = {s: 0.0}
        prev = {}
        heap = [(h(s), 0.0, s)]
        done = set()
        while heap:
            _, d, i = heapq.heappop(heap)
            if i in done:
                continue
            if i == g:
                out = [g]
                while out[-1] != s:
                    out.append(prev[out[-1]])
                return out[::-1]
            done.add(i)
            qi = configs(i)
            for j in nbrs(i):
                if j in done or blocked(i, j):
                    continue
                nd = d + float(np.linalg.norm(configs(j) - qi))
                if nd < dist.get(j, math.inf) - 1e-15:
                    dist[j] = nd
                    prev[j] = i
                    heapq.heappush(heap, (nd + h(j), nd, j))
        return None


def lazy_query(roadmap: Roadmap, ctx: MotionContext, start, goal, budget: int = 5000, k: int = 8):
    return LazyPlanner(roadmap, ctx, k).query(start, goal, budget)


def manifold_constraint(scene: Scene, model: FoliationModel, mid: ManifoldId) -> ManifoldConstraint:
    p = scene.params
    if mid.kind is ManifoldKind.REGRASP:
        return ManifoldConstraint(ManifoldKind.REGRASP, scene.arm, scene.table.height, tol=p.projection_tol)
    g = model.grasp(mid.co_param)
    return ManifoldConstraint(mid.kind, scene.arm, scene.table.height, scene.target, g.object_frame_pose,
                              scene.start_placement.theta,
                              p.transfer_clearance if mid.kind is ManifoldKind.TRANSFER else 0.0,
                              p.projection_tol)


def motion_context(scene: Scene, model: FoliationModel, mid: ManifoldId,
                   constraint: Optional[ManifoldConstraint] = None) -> MotionContext:
    p = scene.params
    arm = scene.arm
    static = scene.static_parts()
    constraint = constraint or manifold_constraint(scene, model, mid)
    if mid.kind is ManifoldKind.REGRASP:
        placement = model.placements[mid.co_param]
        checker = CollisionChecker(arm, static + scene.target.world_parts(placement), arm.gripper.max_aperture,
                                   margin=p.collision_margin)
        return MotionContext(checker, None, arm.sweep_radii(), p.continuity_bound, p.cart_step, constraint)
    g = model.grasp(mid.co_param)
    extra = math.hypot(g.object_frame_pose.x, g.object_frame_pose.y) + scene.target.radius
    aperture = min(g.width, arm.gripper.max_aperture)
    if mid.kind is ManifoldKind.SLIDE:
        checker = CollisionChecker(arm, static, aperture, carried=(scene.target, g.object_frame_pose),
                                   carried_obstacles=scene.obstacle_parts(), margin=p.collision_margin)
        support = (scene.table.x_min, scene.table.x_max)
    else:
        checker = CollisionChecker(arm, static, aperture, carried=(scene.target, g.object_frame_pose),
                                   margin=p.collision_margin)
        support = None
    return MotionContext(checker, support, arm.sweep_radii(extra), p.continuity_bound, p.cart_step, constraint)
