"""Task planning over the foliation: MDP construction, value iteration,
greedy task extraction, outcome-driven probability updates and a
weighted-graph Dijkstra comparison planner.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .arm import ArmModel, Trajectory, inverse_kinematics
from .foliation import FoliationModel, ManifoldId, ManifoldKind, TransitionKind
from .geom import Pose2, compose

INTRA_RHO = 0.5
INTER_RHO = 1.0


class NoTargetState(RuntimeError):
    pass


class NoViablePolicy(RuntimeError):
    pass


class StateRole(str, enum.Enum):
    REGULAR = "Regular"
    INITIAL = "Initial"
    TARGET = "Target"
    FAILURE = "Failure"


class ActionKind(str, enum.Enum):
    INTRA = "IntraManifold"
    INTER = "InterManifold"


@dataclass
class MdpState:
    id: int
    config: Optional[np.ndarray]
    manifold: Optional[ManifoldId]
    role: StateRole = StateRole.REGULAR
    transition: Optional[int] = None  # transition this state is an endpoint of
    placement: Optional[int] = None
    grasp: Optional[int] = None

    @property
    def terminal(self) -> bool:
        return self.role in (StateRole.TARGET, StateRole.FAILURE)


@dataclass
class MdpAction:
    id: int
    src: int
    dst: int
    rho: float
    kind: ActionKind
    manifold: Optional[ManifoldId] = None
    transition: Optional[int] = None
    solution: Optional[Trajectory] = None
    signature: tuple = ()

    @property
    def solved(self) -> bool:
        return self.solution is not None


@dataclass(frozen=True)
class RewardConfig:
    r_target: float = 100.0
    r_step: float = -1.0
    r_failure: float = -100.0
    gamma: float = 0.95

    def __post_init__(self):
        if not self.r_failure < self.r_step < 0 < self.r_target:
            raise ValueError("rewards must satisfy r_failure < r_step < 0 < r_target")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    def scaled(self, c: float) -> "RewardConfig":
        return RewardConfig(c * self.r_target, c * self.r_step, c * self.r_failure, self.gamma)


@dataclass
class ValueTable:
    values: np.ndarray
    best: np.ndarray  # best action id per state, -1 for terminal / dead-end
    sweeps: int
    residuals: list[float]

    @property
    def converged_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


@dataclass
class Task:
    action: int
    start: np.ndarray
    end: np.ndarray
    manifold: ManifoldId


@dataclass
class TaskSequence:
    actions: list[int]  # every action on the walk, in order
    tasks: list[Task]  # intra-manifold actions only
    states: list[int]
    value: float = math.nan


@dataclass
class MdpModel:
    states: list[MdpState]
    actions: list[MdpAction]
    initial: int
    failure: int
    targets: list[int]
    _csr: Optional[tuple] = field(default=None, repr=False)

    def outgoing(self, s: int) -> list[MdpAction]:
        ptr, order, _ = self.csr()
        return [self.actions[i] for i in order[ptr[s]:ptr[s + 1]]]

    def csr(self):
        """Actions grouped by source: (ptr, action order, dst array)."""
        if self._csr is None:
            n = len(self.states)
            src = np.array([a.src for a in self.actions], dtype=np.int64)
            order = np.argsort(src, kind="stable") if src.size else np.zeros(0, dtype=np.int64)
            counts = np.bincount(src, minlength=n) if src.size else np.zeros(n, dtype=np.int64)
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=ptr[1:])
            dst = np.array([self.actions[i].dst for i in order], dtype=np.int64)
            self._csr = (ptr, order.astype(np.int64), dst)
        return self._csr

    def rho_table(self) -> dict[int, float]:
        return {a.id: a.rho for a in self.actions}


def _add_state(states, config, manifold, role=StateRole.REGULAR, **kw) -> int:
    states.append(MdpState(len(states), None if config is None else np.asarray(config, dtype=float),
                           manifold, role, **kw))
    return len(states) - 1


def build_mdp(model: FoliationModel, arm: ArmModel, q_init, goal_pose: Pose2,
              target_ok: Optional[Callable[[ManifoldId, np.ndarray], bool]] = None) -> MdpModel:
    """States are transition endpoints plus Initial, Targets and Failure.

    ``goal_pose`` is the object pose every Target state must realise; the
    optional ``target_ok`` filter rejects Target configs (e.g. in collision).
    """
    states: list[MdpState] = []
    actions: list[MdpAction] = []
    initial = _add_state(states, q_init, ManifoldId(ManifoldKind.REGRASP, 0), StateRole.INITIAL)
    failure = _add_state(states, None, None, StateRole.FAILURE)

    targets: list[int] = []
    for mid in model.manifolds:
        if mid.kind is not ManifoldKind.TRANSFER:
            continue
        ee = compose(goal_pose, model.grasp(mid.co_param).object_frame_pose)
        for q in inverse_kinematics(arm, ee):
            if target_ok is None or target_ok(mid, q):
                targets.append(_add_state(states, q, mid, StateRole.TARGET, grasp=mid.co_param))
    if not targets:
        raise NoTargetState("goal placement unreachable with every high-quality grasp")

    incoming: dict[ManifoldId, list[int]] = {}
    outgoing: dict[ManifoldId, list[int]] = {}
    for t in model.transitions:
        s_out = _add_state(states, t.start_config, t.source, transition=t.id, placement=t.placement, grasp=t.grasp)
        s_in = _add_state(states, t.end_config, t.target, transition=t.id, placement=t.placement, grasp=t.grasp)
        outgoing.setdefault(t.source, []).append(s_out)
        incoming.setdefault(t.target, []).append(s_in)
        actions.append(MdpAction(len(actions), s_out, s_in, INTER_RHO, ActionKind.INTER, None, t.id,
                                 t.trajectory, (t.kind.value, t.placement, t.grasp)))

    trans = model.transitions

    def intra(src: int, dst: int, mid: ManifoldId, sig: tuple):
        actions.append(MdpAction(len(actions), src, dst, INTRA_RHO, ActionKind.INTRA, mid, None, None, sig))

    start_regrasp = ManifoldId(ManifoldKind.REGRASP, 0)
    for s in outgoing.get(start_regrasp, []):
        intra(initial, s, start_regrasp, ("ReGrasp", 0, "init", states[s].grasp))

    for mid in model.manifolds:
        ins = incoming.get(mid, [])
        outs = outgoing.get(mid, [])
        if mid.kind is ManifoldKind.TRANSFER:
            for a in ins:
                for b in targets:
                    if states[b].manifold == mid:
                        intra(a, b, mid, ("Transfer", states[a].placement, "goal"))
            continue
        for a in ins:
            ta = trans[states[a].transition]
            for b in outs:
                tb = trans[states[b].transition]
                if mid.kind is ManifoldKind.SLIDE:
                    if {ta.source, ta.target} == {tb.source, tb.target}:
                        continue  # would only bridge the same pair of manifolds
                    to = ("lift", tb.placement) if tb.kind is TransitionKind.LIFT else tb.placement
                    intra(a, b, mid, ("Slide", ta.placement, to))
                else:
                    if np.max(np.abs(states[a].config - states[b].config)) <= 1e-12:
                        continue
                    intra(a, b, mid, ("ReGrasp", mid.co_param, ta.grasp, tb.grasp))
    return MdpModel(states, actions, initial, failure, targets)


def value_iterate(mdp: MdpModel, rewards: RewardConfig = RewardConfig(), tol: float = 1e-9,
                  max_iters: int = 5000) -> ValueTable:
    """Synchronous Bellman backups until the max-norm change drops below ``tol``."""
    n = len(mdp.states)
    ptr, order, dst = mdp.csr()
    rho = np.array([mdp.actions[i].rho for i in order], dtype=float)
    terminal = np.array([s.terminal for s in mdp.states], dtype=np.uint8)
    is_target = np.array([s.role is StateRole.TARGET for s in mdp.states])
    reward = np.where(is_target[dst], rewards.r_target, rewards.r_step).astype(float) if dst.size else np.zeros(0)
    v = np.zeros(n)
    v_new = np.empty(n)
    best = np.full(n, -1, dtype=np.int64)
    residuals: list[float] = []
    sweeps = 0
    while sweeps < max_iters:
        r = kernels.bellman_sweep(v, ptr, dst, rho, reward, terminal, rewards.gamma, rewards.r_failure, v_new, best)
        sweeps += 1
        residuals.append(r)
        v, v_new = v_new, v
        if r < tol:
            break
    best_ids = np.where(best >= 0, order[np.maximum(best, 0)] if order.size else -1, -1)
    return ValueTable(v.copy(), best_ids.astype(np.int64), sweeps, residuals)


def _sequence(mdp: MdpModel, walk_actions: list[int], value: float) -> TaskSequence:
    tasks, states = [], [mdp.initial]
    for aid in walk_actions:
        a = mdp.actions[aid]
        states.append(a.dst)
        if a.kind is ActionKind.INTRA:
            tasks.append(Task(aid, mdp.states[a.src].config, mdp.states[a.dst].config, a.manifold))
    return TaskSequence(walk_actions, tasks, states, value)


def extract_task_sequence(mdp: MdpModel, values: ValueTable, rewards: RewardConfig = RewardConfig(),
                          eps: float = 1e-6) -> TaskSequence:
    """Greedy best-action walk from the initial state to a target."""
    v0 = float(values.values[mdp.initial])
    if v0 <= rewards.r_failure * (1.0 - eps):
        raise NoViablePolicy(f"initial value {v0:.6g} is failure-dominated")
    s = mdp.initial
    seen = {s}
    walk: list[int] = []
    while mdp.states[s].role is not StateRole.TARGET:
        aid = int(values.best[s])
        if aid < 0:
            raise NoViablePolicy(f"greedy walk reached dead end at state {s}")
        walk.append(aid)
        s = mdp.actions[aid].dst
        if s in seen:
            raise NoViablePolicy(f"greedy walk revisits state {s}")
        seen.add(s)
    return _sequence(mdp, walk, v0)


def report_success(mdp: MdpModel, action_id: int, trajectory: Trajectory) -> None:
    a = mdp.actions[action_id]
    a.rho = 1.0
    a.solution = trajectory


def report_failure(mdp: MdpModel, action_id: int, decay: float = 0.2, decay_similar: float = 0.2) -> list[int]:
    """Decay the failed action and its unsolved look-alikes; returns touched ids."""
    a = mdp.actions[action_id]
    if a.solved:
        raise ValueError(f"action {action_id} already has a solution")
    a.rho *= decay
    touched = [action_id]
    for b in mdp.actions:
        if b.id != action_id and not b.solved and b.kind is a.kind and b.signature == a.signature:
            b.rho *= decay_similar
            touched.append(b.id)
    return touched


class MdpTaskPlanner:
    kind = "mdp"

    def __init__(self, mdp: MdpModel, rewards: RewardConfig = RewardConfig(), tol: float = 1e-9,
                 max_iters: int = 5000, decay: float = 0.2, decay_similar: float = 0.2):
        self.mdp = mdp
        self.rewards = rewards
        self.tol = tol
        self.max_iters = max_iters
        self.decay = decay
        self.decay_similar = decay_similar
        self.sweeps = 0
        self.last_values: Optional[ValueTable] = None

    def next_sequence(self) -> TaskSequence:
        vt = value_iterate(self.mdp, self.rewards, self.tol, self.max_iters)
        self.sweeps += vt.sweeps
        self.last_values = vt
        return extract_task_sequence(self.mdp, vt, self.rewards)

    def report_success(self, action_id: int, trajectory: Trajectory) -> None:
        report_success(self.mdp, action_id, trajectory)

    def report_failure(self, action_id: int) -> list[int]:
        return report_failure(self.mdp, action_id, self.decay, self.decay_similar)


class DijkstraTaskPlanner:
    """Minimum-total-weight path over the same graph; every outcome adds weight."""

    kind = "dijkstra"
    success_penalty = 0.1
    failure_penalty = 10.0

    def __init__(self, mdp: MdpModel):
        self.mdp = mdp
        self.weights = np.ones(len(mdp.actions))
        self.sweeps = 0

    def next_sequence(self) -> TaskSequence:
        mdp = self.mdp
        dist = {mdp.initial: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, mdp.initial)]
        done = set()
        goal = None
        while heap:
            d, s = heapq.heappop(heap)
            if s in done:
                continue
            done.add(s)
            if mdp.states[s].role is StateRole.TARGET:
                goal = s
                break
            for a in mdp.outgoing(s):
                nd = d + float(self.weights[a.id])
                if nd < dist.get(a.dst, math.inf):
                    dist[a.dst] = nd
                    prev[a.dst] = a.id
                    heapq.heappush(heap, (nd, a.dst))
        if goal is None:
            raise NoViablePolicy("no path from the initial state to any target")
        walk = []
        s = goal
        while s != mdp.initial:
            aid = prev[s]
            walk.append(aid)
            s = mdp.actions[aid].src
        return _sequence(mdp, walk[::-1], -dist[goal])

    def report_success(self, action_id: int, trajectory: Trajectory) -> None:
        self.weights[action_id] += self.success_penalty
        self.mdp.actions[action_id].solution = trajectory

    def report_failure(self, action_id: int) -> list[int]:
        a = self.mdp.actions[action_id]
        touched = [b.id for b in self.mdp.actions if b.id == action_id or (b.kind is a.kind and b.signature == a.signature)]
        self.weights[touched] += self.failure_penalty
        return touched

