"""Builders shared by several test modules."""

import math

import numpy as np

from regrasp_tamp.arm import ArmModel
from regrasp_tamp.geom import Pose2
from regrasp_tamp.mdp import ActionKind, MdpAction, MdpModel, MdpState, StateRole


def unit_arm(limits=((-math.pi, math.pi),) * 3) -> ArmModel:
    return ArmModel(base=Pose2(), link_lengths=(1.0, 1.0, 1.0), link_widths=(0.05, 0.05, 0.05), joint_limits=limits)


def hand_mdp(edges, n_states, targets, initial=0, failure=1, inter=()):
    """MdpModel from (src, dst, rho[, signature]) tuples; ``inter`` marks inter-manifold indices."""
    roles = [StateRole.REGULAR] * n_states
    roles[initial] = StateRole.INITIAL
    roles[failure] = StateRole.FAILURE
    for t in targets:
        roles[t] = StateRole.TARGET
    states = [MdpState(i, np.zeros(3), None, roles[i]) for i in range(n_states)]
    actions = []
    for i, e in enumerate(edges):
        src, dst, rho = e[:3]
        sig = e[3] if len(e) > 3 else ("edge", i)
        kind = ActionKind.INTER if i in inter else ActionKind.INTRA
        actions.append(MdpAction(i, src, dst, rho, kind, signature=sig))
    return MdpModel(states, actions, initial, failure, list(targets))


def random_mdp(rng: np.random.Generator, n_max: int = 20, max_policies: int = 1024):
    """Random MDP with at most ``n_max`` states and a bounded policy count.

    Returns (model, oracle tuple (n, terminal, [(src, dst, rho)], is_target)).
    """
    n = int(rng.integers(3, n_max + 1))
    n_targets = int(rng.integers(1, min(3, n - 2) + 1))
    roles = [StateRole.INITIAL, StateRole.FAILURE] + [StateRole.TARGET] * n_targets
    roles += [StateRole.REGULAR] * (n - len(roles))
    raw = []
    product = 1
    for s in range(n):
        if roles[s] in (StateRole.TARGET, StateRole.FAILURE):
            continue
        deg = int(rng.integers(0, 4))
        if s == 0:
            deg = max(deg, 1)
        while deg > 1 and product * deg > max_policies:
            deg -= 1
        product *= max(deg, 1)
        for _ in range(deg):
            dst = int(rng.choice([i for i in range(n) if i != 1]))
            kind = rng.integers(3)
            rho = 1.0 if kind == 0 else (0.5 if kind == 1 else float(rng.uniform()))
            raw.append((s, dst, rho))
    order = rng.permutation(len(raw))
    raw = [raw[i] for i in order]
    states = [MdpState(i, np.zeros(3), None, roles[i]) for i in range(n)]
    actions = [MdpAction(i, s, d, r, ActionKind.INTRA, signature=("sig", int(rng.integers(3))))
               for i, (s, d, r) in enumerate(raw)]
    targets = [i for i in range(n) if roles[i] is StateRole.TARGET]
    model = MdpModel(states, actions, 0, 1, targets)
    terminal = [r in (StateRole.TARGET, StateRole.FAILURE) for r in roles]
    is_target = [r is StateRole.TARGET for r in roles]
    return model, (n, terminal, [(a.src, a.dst, a.rho) for a in actions], is_target)
