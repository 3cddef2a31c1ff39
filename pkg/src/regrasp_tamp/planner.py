"""Top-level planning: grasp analysis, direct pick, foliation/MDP re-planning
loop, the no-rearrangement baseline and quasi-static execution.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .arm import CollisionChecker, Trajectory, arm_world_parts, forward_kinematics, inverse_kinematics
from .foliation import (
    FoliationModel,
    ManifoldId,
    ManifoldKind,
    NoHighQualityGraspAnywhere,
    TransitionKind,
    build_foliation,
    sample_pair,
    sample_placements,
    sample_transitions,
)
from .geom import GEOM_EPS, Pose2, centroid_and_mass, compose, inverse
from .grasping import (
    ComEstimate,
    Grasp,
    classify,
    estimate_com,
    lift_rotation,
    pivot_direction,
    sample_grasps,
    slip_angle,
    stability_score,
    torque_capacity,
    torque_threshold,
)
from .mdp import (
    ActionKind,
    DijkstraTaskPlanner,
    MdpTaskPlanner,
    NoTargetState,
    NoViablePolicy,
    RewardConfig,
    build_mdp,
)
from .motion import LazyPlanner, build_roadmap, manifold_constraint, motion_context, RoadmapEmpty
from .scene import Scene

log = logging.getLogger(__name__)

_KIND_INDEX = {ManifoldKind.REGRASP: 0, ManifoldKind.SLIDE: 1, ManifoldKind.TRANSFER: 2}


class PlanStatus(str, enum.Enum):
    SOLVED = "Solved"
    NO_VIABLE_POLICY = "NoViablePolicy"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    NO_HIGH_QUALITY_GRASP = "NoHighQualityGrasp"


@dataclass
class Segment:
    kind: str  # "task" or a transition kind
    manifold: ManifoldId
    trajectory: Trajectory
    grasp: Optional[int] = None
    placement: Optional[int] = None
    action: Optional[int] = None


@dataclass
class EpisodeRecord:
    episode: int
    actions: list[int]
    initial_value: float
    failed_action: Optional[int] = None
    failed_manifold: Optional[str] = None
    rho_updates: dict = field(default_factory=dict)


@dataclass
class PlanResult:
    status: PlanStatus
    planner: str
    segments: list[Segment] = field(default_factory=list)
    episodes: int = 0
    log: list[EpisodeRecord] = field(default_factory=list)
    grasps: dict = field(default_factory=dict)  # id -> (Grasp, GraspQuality)
    final_grasp: Optional[int] = None
    placements: list[Pose2] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.status is PlanStatus.SOLVED

    @property
    def trajectory(self) -> np.ndarray:
        if not self.segments:
            return np.zeros((0, 3))
        parts = [self.segments[0].trajectory.waypoints]
        parts += [s.trajectory.waypoints[1:] for s in self.segments[1:]]
        return np.concatenate(parts, axis=0)

    def max_junction_gap(self) -> float:
        gaps = [float(np.max(np.abs(a.trajectory.end - b.trajectory.start)))
                for a, b in zip(self.segments, self.segments[1:])]
        return max(gaps, default=0.0)

    def slide_displacements(self) -> list[Segment]:
        """Slide tasks that actually move the object along the table."""
        out = []
        for s in self.segments:
            if s.kind == "task" and s.manifold.kind is ManifoldKind.SLIDE and len(s.trajectory) > 1:
                if float(np.max(np.abs(s.trajectory.end - s.trajectory.start))) > 1e-9:
                    out.append(s)
        return out


@dataclass
class StabilityReport:
    delta_r: float
    stability: float
    success: bool
    replans: int = 0
    reason: str = ""


class _Session:
    """Grasp analysis plus per-manifold roadmap cache for one scene."""

    def __init__(self, scene: Scene):
        self.scene = scene
        p = scene.params
        self.grasps = sample_grasps(scene.target, scene.arm.gripper, p.cone_half_angle, p.grasp_spacing)
        self.com = estimate_com(scene.target, p.com_noise_sigma, scene.seed)
        thr = torque_threshold(scene.arm.gripper, p.torsional_mu, p.patch_radius, p.threshold_factor)
        self.rated = classify(self.grasps, self.com, thr, scene.start_placement.theta)
        self.model = FoliationModel([scene.start_placement], self.rated, [])
        self.planners: dict[ManifoldId, Optional[LazyPlanner]] = {}
        self._target_ctx: dict = {}
        self.validated = 0
        self.sweeps = 0

    def use_model(self, model: FoliationModel) -> None:
        self.model = model
        self._target_ctx = {}

    def _planner(self, mid: ManifoldId) -> Optional[LazyPlanner]:
        if mid not in self.planners:
            p = self.scene.params
            c = manifold_constraint(self.scene, self.model, mid)
            seed = np.random.SeedSequence([self.scene.seed, _KIND_INDEX[mid.kind], mid.co_param])
            try:
                rm = build_roadmap(c, p.n_samples, p.k_neighbors, np.random.default_rng(seed), p.retry_factor)
            except RoadmapEmpty:
                self.planners[mid] = None
            else:
                self.planners[mid] = LazyPlanner(rm, motion_context(self.scene, self.model, mid, c), p.k_neighbors)
        return self.planners[mid]

    def solve(self, mid: ManifoldId, start, goal) -> Optional[Trajectory]:
        lp = self._planner(mid)
        if lp is None:
            return None
        traj, used = lp.query(start, goal, self.scene.params.validation_budget)
        self.validated += used
        if traj is not None:
            traj.manifold = mid
        return traj

    def goal_pose(self) -> Pose2:
        return self.scene.lifted(self.scene.goal_placement)

    def target_configs(self, g: Grasp) -> list[np.ndarray]:
        mid = ManifoldId(ManifoldKind.TRANSFER, g.id)
        ctx = motion_context(self.scene, self.model, mid)
        ee = compose(self.goal_pose(), g.object_frame_pose)
        return [q for q in inverse_kinematics(self.scene.arm, ee) if ctx.valid(q)]

    def target_ok(self, mid: ManifoldId, q) -> bool:
        if mid not in self._target_ctx:
            self._target_ctx[mid] = motion_context(self.scene, self.model, mid)
        return self._target_ctx[mid].valid(q)


def _grasp_table(session: _Session) -> dict:
    return {g.id: (g, q) for g, q in session.rated}


def _direct(session: _Session, only_high: bool) -> Optional[list[Segment]]:
    """Approach, lift and transfer straight from the start placement."""
    scene = session.scene
    p = scene.params
    q_init = np.array(scene.q_init)
    regrasp = ManifoldId(ManifoldKind.REGRASP, 0)
    for g, quality in session.rated:
        if only_high and not quality.high:
            continue
        slide = ManifoldId(ManifoldKind.SLIDE, g.id)
        transfer = ManifoldId(ManifoldKind.TRANSFER, g.id)
        targets = None
        pairs = sample_pair(scene, scene.target, scene.start_placement, g, True, p.pregrasp_offset, p.lift_height)
        for q_grasp, release, lift in pairs:
            if lift is None:
                continue
            if targets is None:
                targets = session.target_configs(g)
            if not targets:
                break
            approach = release.reversed()
            reach = session.solve(regrasp, q_init, approach.start)
            if reach is None:
                continue
            for tq in targets:
                carry = session.solve(transfer, lift.end, tq)
                if carry is None:
                    continue
                return [
                    Segment("task", regrasp, reach, None, 0),
                    Segment(TransitionKind.APPROACH.value, regrasp, Trajectory(approach.waypoints, regrasp), g.id, 0),
                    Segment("task", slide, Trajectory(q_grasp[None, :].copy(), slide), g.id, 0),
                    Segment(TransitionKind.LIFT.value, slide, Trajectory(lift.waypoints, slide), g.id, 0),
                    Segment("task", transfer, carry, g.id, 0),
                ]
    return None


def _final_grasp(segments: list[Segment]) -> Optional[int]:
    lifts = [s.grasp for s in segments if s.kind == TransitionKind.LIFT.value]
    return lifts[-1] if lifts else None


def _finish(result: PlanResult, session: _Session, t0: float) -> PlanResult:
    result.metrics = {
        "wall_time_ms": 1000.0 * (time.perf_counter() - t0),
        "validated_edges": session.validated,
        "value_sweeps": session.sweeps,
        "replans": max(0, result.episodes - 1),
        "backend": kernels.BACKEND,
    }
    result.grasps = _grasp_table(session)
    result.final_grasp = _final_grasp(result.segments) if result.solved else None
    return result


def plan(scene: Scene, task_planner: str = "mdp") -> PlanResult:
    """Direct pick with a high-quality grasp if possible, else foliation re-planning."""
    if task_planner not in ("mdp", "dijkstra"):
        raise ValueError(f"unknown task planner {task_planner!r}")
    t0 = time.perf_counter()
    name = "multimodal" if task_planner == "mdp" else "dijkstra-task"
    session = _Session(scene)
    result = PlanResult(PlanStatus.NO_VIABLE_POLICY, name, placements=[scene.start_placement])
    if not any(q.high for _, q in session.rated):
        result.status = PlanStatus.NO_HIGH_QUALITY_GRASP
        result.message = "no high-quality grasp"
        return _finish(result, session, t0)

    direct = _direct(session, only_high=True)
    if direct is not None:
        result.status, result.segments, result.episodes = PlanStatus.SOLVED, direct, 1
        return _finish(result, session, t0)

    p = scene.params
    placements = sample_placements(scene, scene.target, p.n_placements, scene.seed)
    try:
        model = build_foliation(session.rated, placements)
    except NoHighQualityGraspAnywhere as exc:
        result.status, result.message = PlanStatus.NO_HIGH_QUALITY_GRASP, str(exc)
        return _finish(result, session, t0)
    session.use_model(model)
    model.transitions = sample_transitions(model, scene)
    result.placements = list(placements)
    try:
        mdp = build_mdp(model, scene.arm, scene.q_init, session.goal_pose(), session.target_ok)
    except NoTargetState as exc:
        result.message = str(exc)
        return _finish(result, session, t0)

    rewards = RewardConfig(p.r_target, p.r_step, p.r_failure, p.gamma)
    if task_planner == "mdp":
        tp = MdpTaskPlanner(mdp, rewards, p.vi_tol, p.vi_max_iters, p.decay, p.decay_similar)
    else:
        tp = DijkstraTaskPlanner(mdp)
    trans = model.transitions
    result.status = PlanStatus.BUDGET_EXHAUSTED
    for episode in range(1, p.episode_budget + 1):
        result.episodes = episode
        try:
            seq = tp.next_sequence()
        except NoViablePolicy as exc:
            session.sweeps = tp.sweeps
            result.status, result.message = PlanStatus.NO_VIABLE_POLICY, str(exc)
            break
        session.sweeps = tp.sweeps
        rec = EpisodeRecord(episode, list(seq.actions), float(seq.value))
        result.log.append(rec)
        segments: list[Segment] = []
        failed = False
        for aid in seq.actions:
            a = mdp.actions[aid]
            src, dst = mdp.states[a.src], mdp.states[a.dst]
            if a.kind is ActionKind.INTER:
                t = trans[a.transition]
                segments.append(Segment(t.kind.value, t.source, a.solution, t.grasp, t.placement, aid))
                continue
            traj = a.solution
            if traj is None:
                traj = session.solve(a.manifold, src.config, dst.config)
                if traj is None:
                    before = mdp.rho_table()
                    touched = tp.report_failure(aid)
                    rec.failed_action, rec.failed_manifold = aid, str(a.manifold)
                    if task_planner == "mdp":
                        rec.rho_updates = {i: (before[i], mdp.actions[i].rho) for i in touched}
                    else:
                        rec.rho_updates = {i: float(tp.weights[i]) for i in touched}
                    failed = True
                    break
                tp.report_success(aid, traj)
            held = None if a.manifold.kind is ManifoldKind.REGRASP else a.manifold.co_param
            placement = a.manifold.co_param if a.manifold.kind is ManifoldKind.REGRASP else src.placement
            segments.append(Segment("task", a.manifold, traj, held, placement, aid))
        if not failed:
            result.status, result.segments = PlanStatus.SOLVED, segments
            break
    return _finish(result, session, t0)


def plan_baseline(scene: Scene) -> PlanResult:
    """Direct approach-lift-transfer with any grasp, in ascending torque order."""
    t0 = time.perf_counter()
    session = _Session(scene)
    result = PlanResult(PlanStatus.NO_VIABLE_POLICY, "baseline", placements=[scene.start_placement])
    direct = _direct(session, only_high=False)
    result.episodes = 1
    if direct is not None:
        result.status, result.segments = PlanStatus.SOLVED, direct
    else:
        result.message = "no grasp admits a direct pick from the start placement"
    return _finish(result, session, t0)


# execution ---------------------------------------------------------------


class ExecutionCollision(RuntimeError):
    pass


def _perturb(pose: Pose2, pivot: tuple[float, float], dx: float, dth: float) -> Pose2:
    """Shift horizontally by dx and rotate by dth about ``pivot``."""
    rot = compose(Pose2(pivot[0] + dx, pivot[1], dth), Pose2(-pivot[0], -pivot[1], 0.0))
    return compose(rot, pose)


def _swing_hits(scene: Scene, obj_pose: Pose2, centre: tuple[float, float], angle: float) -> bool:
    swung = compose(compose(Pose2(centre[0], centre[1], angle), Pose2(-centre[0], -centre[1], 0.0)), obj_pose)
    return kernels.parts_collide(scene.target.world_parts(swung), scene.static_parts(), 0.0, GEOM_EPS)


def execute(scene: Scene, result: PlanResult, noise: tuple[float, float] = (0.0, 0.0), seed=0) -> StabilityReport:
    """Quasi-static playback with seeded in-hand noise and re-observation."""
    if not result.solved:
        raise ValueError("can only execute a solved plan")
    sigma_xy, sigma_th = noise
    if sigma_xy < 0 or sigma_th < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    (cx, cy), mass = centroid_and_mass(scene.target)
    true_com = ComEstimate((cx, cy), mass)
    replans = 0
    while True:
        out = _playback(scene, result, rng, sigma_xy, sigma_th, true_com)
        if isinstance(out, StabilityReport):
            out.replans = replans
            return out
        # re-observation after a noisy release
        placement, q_now = out
        replans += 1
        if replans > scene.params.execution_replans:
            return StabilityReport(math.inf, 0.0, False, replans - 1, "re-plan budget exhausted")
        scene = scene.replace(start_placement=placement, q_init=tuple(float(v) for v in q_now))
        if result.planner == "baseline":
            result = plan_baseline(scene)
        else:
            result = plan(scene, "dijkstra" if result.planner == "dijkstra-task" else "mdp")
        if not result.solved:
            return StabilityReport(math.inf, 0.0, False, replans, f"re-plan failed: {result.status.value}")


def _playback(scene: Scene, result: PlanResult, rng, sigma_xy, sigma_th, true_com):
    arm = scene.arm
    grip = arm.gripper
    static = scene.static_parts()
    obstacles = scene.obstacle_parts()
    obj = scene.target
    noisy = sigma_xy > 0 or sigma_th > 0
    obj_pose = scene.start_placement
    in_hand: Optional[Pose2] = None  # object pose in the end-effector frame
    perturbed = False
    grasp: Optional[Grasp] = None
    final_report = None
    last_lift = max((i for i, s in enumerate(result.segments) if s.kind == TransitionKind.LIFT.value), default=-1)
    fail = lambda why: StabilityReport(math.inf, 0.0, False, 0, why)

    for idx, seg in enumerate(result.segments):
        wps = seg.trajectory.waypoints
        if seg.kind == TransitionKind.RELEASE.value and in_hand is not None:
            held = compose(forward_kinematics(arm, wps[0]), in_hand)
            landed = scene.resting_pose(held.x, obj_pose.theta)
            was_perturbed = perturbed
            obj_pose, in_hand, grasp, perturbed = landed, None, None, False
            if noisy and was_perturbed:
                if _open_hits(arm, wps, static + obj.world_parts(obj_pose)):
                    return fail("release collides after in-hand slip")
                return obj_pose, wps[-1]
        if in_hand is None:
            if _open_hits(arm, wps, static + obj.world_parts(obj_pose)):
                return fail(f"collision in segment {idx} ({seg.kind})")
            if seg.kind == TransitionKind.APPROACH.value:
                grasp = result.grasps[seg.grasp][0]
                ee = forward_kinematics(arm, wps[-1])
                in_hand = compose(inverse(ee), obj_pose)
                if noisy:
                    centre = ee.apply_point(grip.center_offset, 0.0)
                    dx = float(rng.normal(0.0, sigma_xy)) if sigma_xy > 0 else 0.0
                    dth = float(rng.normal(0.0, sigma_th)) if sigma_th > 0 else 0.0
                    in_hand = compose(inverse(ee), _perturb(obj_pose, centre, dx, dth))
                    perturbed = True
            continue
        aperture = min(grasp.width, grip.max_aperture)
        carried_against = static if seg.manifold.kind is not ManifoldKind.SLIDE else obstacles
        checker = CollisionChecker(arm, static, aperture)
        for q in wps:
            if checker(q):
                return fail(f"arm collision in segment {idx}")
            pose = compose(forward_kinematics(arm, q), in_hand)
            if carried_against and kernels.parts_collide(obj.world_parts(pose), carried_against, 0.0, GEOM_EPS):
                return fail(f"carried object collides in segment {idx}")
        if idx == last_lift:
            ee = forward_kinematics(arm, wps[-1])
            if perturbed:
                pose = compose(ee, in_hand)
                com_w = pose.apply_point(*true_com.point)
                centre = ee.apply_point(grip.center_offset, 0.0)
                ox, oy = com_w[0] - centre[0], com_w[1] - centre[1]
                p = scene.params
                dr = slip_angle(ox, oy, true_com.mass, torque_capacity(grip, p.torsional_mu, p.patch_radius))
                sign = -1.0 if ox > 0 else 1.0
            else:
                p = scene.params
                dr = lift_rotation(grasp, true_com, grip, p.torsional_mu, p.patch_radius, obj_pose.theta)
                sign = pivot_direction(grasp, true_com, obj_pose.theta)
            final_report = (dr, ee, sign)
    if final_report is None:
        return fail("plan has no lift")
    dr, ee, sign = final_report
    if dr >= math.pi / 2:
        return StabilityReport(dr, 0.0, False, 0, "object pivots beyond a quarter turn")
    if dr > 0:
        ee_up = forward_kinematics(arm, result.segments[last_lift].trajectory.end)
        centre = ee_up.apply_point(grip.center_offset, 0.0)
        if _swing_hits(scene, compose(ee_up, in_hand), centre, sign * dr):
            return StabilityReport(dr, 0.0, False, 0, "slipping object swings into the scene")
    return StabilityReport(dr, stability_score(dr, scene.params.stability_eps), True)


def _open_hits(arm, wps, parts) -> bool:
    ap = arm.gripper.max_aperture
    for q in wps:
        if kernels.parts_collide(arm_world_parts(arm, q, ap), parts, 0.0, GEOM_EPS):
            return True
    return False
