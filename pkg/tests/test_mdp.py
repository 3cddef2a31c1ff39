import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regrasp_tamp.arm import Trajectory
from regrasp_tamp.foliation import ManifoldKind, TransitionKind, build_foliation, sample_transitions
from regrasp_tamp.mdp import (
    ActionKind,
    DijkstraTaskPlanner,
    MdpTaskPlanner,
    NoTargetState,
    NoViablePolicy,
    RewardConfig,
    StateRole,
    build_mdp,
    extract_task_sequence,
    report_failure,
    report_success,
    value_iterate,
)
from regrasp_tamp.planner import _Session
from regrasp_tamp.scenes import _scene, adjacent_scene, l_shape, post_bar

import oracles
from helpers import hand_mdp, random_mdp

R = RewardConfig()
seeds = st.integers(0, 2**32 - 1)


def _oracle(spec, rewards=R):
    n, terminal, actions, is_target = spec
    return oracles.brute_force_optimum(n, terminal, actions, rewards.r_target, rewards.r_step, rewards.r_failure,
                                       rewards.gamma, is_target)


def _dummy_traj():
    return Trajectory(np.zeros((1, 3)))


# backups -------------------------------------------------------------------------


def test_certain_step_to_target():
    mdp = hand_mdp([(0, 2, 1.0)], 3, [2])
    vt = value_iterate(mdp)
    assert vt.values[0] == pytest.approx(100.0, abs=1e-12)


def test_coin_flip_step_to_target():
    # 0.5 * 100 + 0.5 * -100
    mdp = hand_mdp([(0, 2, 0.5)], 3, [2])
    assert value_iterate(mdp).values[0] == pytest.approx(0.0, abs=1e-12)


def test_two_step_chain():
    # v1 = 0.5*100 - 50 = 0; v0 = 0.5*(-1 + 0.95*0) - 50
    mdp = hand_mdp([(0, 3, 0.5), (3, 2, 0.5)], 4, [2])
    vt = value_iterate(mdp)
    assert vt.values[3] == pytest.approx(0.0, abs=1e-12)
    assert vt.values[0] == pytest.approx(-50.5, abs=1e-12)


def test_dominant_action_chosen():
    mdp = hand_mdp([(0, 2, 0.4), (0, 2, 1.0)], 3, [2])
    vt = value_iterate(mdp)
    assert vt.best[0] == 1
    assert vt.values[0] == pytest.approx(100.0)


def test_dead_end_worth_failure():
    mdp = hand_mdp([(0, 3, 1.0)], 4, [2])
    vt = value_iterate(mdp)
    assert vt.values[3] == pytest.approx(R.r_failure)
    assert vt.best[3] == -1


def test_terminals_stay_zero_every_sweep():
    mdp = hand_mdp([(0, 3, 0.5), (3, 2, 1.0), (3, 0, 0.7)], 4, [2])
    for k in range(1, 8):
        vt = value_iterate(mdp, max_iters=k)
        assert vt.values[1] == 0.0 and vt.values[2] == 0.0


def test_reward_config_validated():
    with pytest.raises(ValueError):
        RewardConfig(r_step=-200.0)
    with pytest.raises(ValueError):
        RewardConfig(gamma=1.0)


@given(seeds)
def test_value_iteration_matches_brute_force(seed):
    model, spec = random_mdp(np.random.default_rng(seed), 12, 256)
    best, _ = _oracle(spec)
    vt = value_iterate(model, tol=1e-12)
    np.testing.assert_allclose(vt.values, best, atol=1e-6)
    # the greedy policy itself is optimal
    n, terminal, actions, is_target = spec
    choice = [int(b) for b in vt.best]
    pv = oracles.policy_values(n, terminal, actions, choice, R.r_target, R.r_step, R.r_failure, R.gamma, is_target)
    np.testing.assert_allclose(pv, best, atol=1e-6)


@given(seeds)
def test_residuals_contract(seed):
    model, _ = random_mdp(np.random.default_rng(seed))
    tol = 1e-9
    vt = value_iterate(model, tol=tol)
    res = vt.residuals
    for a, b in zip(res, res[1:]):
        assert b <= R.gamma * a + 1e-12
    if res[0] > tol:
        bound = math.ceil(1 + math.log(tol / res[0]) / math.log(R.gamma))
        assert vt.sweeps <= bound
    assert vt.converged_residual < tol


@given(seeds, st.integers(-4, 6))
def test_argmax_invariant_under_reward_scaling(seed, power):
    model, _ = random_mdp(np.random.default_rng(seed))
    c = 2.0 ** power
    a = value_iterate(model, tol=1e-12)
    b = value_iterate(model, R.scaled(c), tol=1e-12 * c)
    np.testing.assert_allclose(b.values, c * a.values, rtol=1e-9, atol=1e-9 * c)
    np.testing.assert_array_equal(a.best, b.best)


# extraction ----------------------------------------------------------------------


def test_extract_follows_best_actions():
    # direct route is risky; the two-step route is certain
    mdp = hand_mdp([(0, 2, 0.3), (0, 3, 1.0), (3, 2, 1.0, ("x",))], 4, [2], inter=(2,))
    seq = extract_task_sequence(mdp, value_iterate(mdp))
    assert seq.actions == [1, 2]
    assert seq.states == [0, 3, 2]
    assert [t.action for t in seq.tasks] == [1]
    assert seq.value == pytest.approx(-1 + 0.95 * 100)


def test_extract_failure_dominated():
    mdp = hand_mdp([(0, 3, 1.0)], 4, [2])
    with pytest.raises(NoViablePolicy):
        extract_task_sequence(mdp, value_iterate(mdp))


def test_extract_no_actions():
    mdp = hand_mdp([], 3, [2])
    with pytest.raises(NoViablePolicy):
        extract_task_sequence(mdp, value_iterate(mdp))


# outcome updates -----------------------------------------------------------------


def test_two_failures_decay_to_two_percent():
    mdp = hand_mdp([(0, 2, 0.5)], 3, [2])
    report_failure(mdp, 0)
    report_failure(mdp, 0)
    assert mdp.actions[0].rho == pytest.approx(0.02)


def test_failure_decays_similar_unsolved():
    sig = ("Slide", 0, 1)
    mdp = hand_mdp([(0, 3, 0.5, sig), (3, 2, 0.5, sig), (0, 2, 0.5, ("other",)), (0, 2, 0.5, sig)], 4, [2])
    report_success(mdp, 3, _dummy_traj())
    touched = report_failure(mdp, 0)
    assert sorted(touched) == [0, 1]
    assert mdp.actions[0].rho == pytest.approx(0.1)
    assert mdp.actions[1].rho == pytest.approx(0.1)
    assert mdp.actions[2].rho == 0.5
    assert mdp.actions[3].rho == 1.0


def test_similarity_requires_same_kind():
    sig = ("s",)
    mdp = hand_mdp([(0, 3, 0.5, sig), (3, 2, 1.0, sig)], 4, [2], inter=(1,))
    assert report_failure(mdp, 0) == [0]
    assert mdp.actions[1].rho == 1.0


def test_failure_on_solved_rejected():
    mdp = hand_mdp([(0, 2, 0.5)], 3, [2])
    report_success(mdp, 0, _dummy_traj())
    assert mdp.actions[0].rho == 1.0
    with pytest.raises(ValueError):
        report_failure(mdp, 0)


def test_reextraction_avoids_failed_action():
    mdp = hand_mdp([(0, 2, 0.5), (0, 3, 0.5), (3, 2, 1.0)], 4, [2])
    tp = MdpTaskPlanner(mdp)
    assert tp.next_sequence().actions == [0]
    tp.report_failure(0)
    assert tp.next_sequence().actions == [1, 2]


@given(seeds, st.lists(st.tuples(st.booleans(), st.integers(0, 1000)), max_size=25))
def test_updates_keep_rho_in_range(seed, events):
    model, _ = random_mdp(np.random.default_rng(seed))
    if not model.actions:
        return
    solved: set[int] = set()
    for ok, pick in events:
        aid = pick % len(model.actions)
        if ok:
            report_success(model, aid, _dummy_traj())
            solved.add(aid)
        elif not model.actions[aid].solved:
            report_failure(model, aid)
        # the solved set only grows and pins rho at one
        assert {a.id for a in model.actions if a.solved} == solved
        assert all(model.actions[i].rho == 1.0 for i in solved)
        assert all(0.0 <= a.rho <= 1.0 for a in model.actions)


@given(seeds)
def test_failed_choice_kept_only_if_still_best(seed):
    rng = np.random.default_rng(seed)
    model, spec = random_mdp(rng, 10, 128)
    vt = value_iterate(model, tol=1e-12)
    best = int(vt.best[0])
    if best < 0:
        return
    report_failure(model, best)
    after = value_iterate(model, tol=1e-12)
    if int(after.best[0]) != best:
        return
    # the decayed action is still chosen, so no policy without it does better
    n, terminal, actions, is_target = spec
    decayed = [(a.src, a.dst, a.rho) for a in model.actions]
    rest = [a if i != best else (a[0], a[1], 0.0) for i, a in enumerate(decayed)]
    without, _ = _oracle((n, terminal, rest, is_target))
    assert without[0] <= after.values[0] + 1e-6


# dijkstra -------------------------------------------------------------------------


def _two_routes():
    # short route 0-3-4-2 (length 3), long route 0-5-6-7-8-2 (length 5)
    edges = [(0, 3, 0.5, ("a",)), (3, 4, 0.5), (4, 2, 0.5),
             (0, 5, 0.5), (5, 6, 0.5), (6, 7, 0.5), (7, 8, 0.5), (8, 2, 0.5)]
    return hand_mdp(edges, 9, [2])


def test_dijkstra_shortest_route():
    tp = DijkstraTaskPlanner(_two_routes())
    seq = tp.next_sequence()
    assert seq.actions == [0, 1, 2]
    assert seq.value == -3.0


def test_dijkstra_failure_switches_route():
    tp = DijkstraTaskPlanner(_two_routes())
    tp.report_failure(0)
    assert tp.weights[0] == 11.0
    assert tp.next_sequence().actions == [3, 4, 5, 6, 7]


def test_dijkstra_success_adds_weight():
    mdp = _two_routes()
    tp = DijkstraTaskPlanner(mdp)
    tp.report_success(1, _dummy_traj())
    assert tp.weights[1] == pytest.approx(1.1)
    # the success probability is not touched by this planner
    assert mdp.actions[1].rho == 0.5


def test_dijkstra_failure_hits_solved_lookalikes():
    sig = ("s",)
    mdp = hand_mdp([(0, 3, 0.5, sig), (3, 2, 0.5, sig)], 4, [2])
    tp = DijkstraTaskPlanner(mdp)
    tp.report_success(1, _dummy_traj())
    assert sorted(tp.report_failure(0)) == [0, 1]
    assert tp.weights.tolist() == pytest.approx([11.0, 11.1])


def test_dijkstra_no_path():
    with pytest.raises(NoViablePolicy):
        DijkstraTaskPlanner(hand_mdp([(0, 3, 1.0)], 4, [2])).next_sequence()


# construction from a foliation ------------------------------------------------------


@pytest.fixture(scope="module")
def built():
    scene = adjacent_scene(l_shape(0.18, 0.10, 0.04, 0.4), 0.55, 0.35, 0.02)
    session = _Session(scene)
    model = build_foliation(session.rated, [scene.start_placement, scene.resting_pose(0.35)])
    session.use_model(model)
    model.transitions = sample_transitions(model, scene)
    mdp = build_mdp(model, scene.arm, scene.q_init, session.goal_pose(), session.target_ok)
    return scene, session, model, mdp


def test_build_roles(built):
    _, _, model, mdp = built
    roles = [s.role for s in mdp.states]
    assert roles.count(StateRole.INITIAL) == 1 and roles.count(StateRole.FAILURE) == 1
    assert mdp.targets and all(mdp.states[t].role is StateRole.TARGET for t in mdp.targets)
    for t in mdp.targets:
        mid = mdp.states[t].manifold
        assert mid.kind is ManifoldKind.TRANSFER and model.quality(mid.co_param).high
    # two endpoint states per transition
    n_regular = roles.count(StateRole.REGULAR)
    assert n_regular == 2 * len(model.transitions)


def test_build_actions(built):
    _, _, model, mdp = built
    inter = [a for a in mdp.actions if a.kind is ActionKind.INTER]
    intra = [a for a in mdp.actions if a.kind is ActionKind.INTRA]
    assert len(inter) == len(model.transitions)
    for a in inter:
        assert a.rho == 1.0 and a.solved
        t = model.transitions[a.transition]
        np.testing.assert_array_equal(mdp.states[a.src].config, t.trajectory.start)
        np.testing.assert_array_equal(mdp.states[a.dst].config, t.trajectory.end)
    for a in intra:
        assert a.rho == 0.5 and not a.solved
        src, dst = mdp.states[a.src], mdp.states[a.dst]
        assert src.manifold == dst.manifold == a.manifold
        assert dst.role is not StateRole.FAILURE
        if a.manifold.kind is ManifoldKind.TRANSFER:
            assert dst.role is StateRole.TARGET
        if dst.role is StateRole.TARGET:
            assert a.manifold.kind is ManifoldKind.TRANSFER
    starts = [a for a in intra if a.src == mdp.initial]
    assert starts and all(a.manifold.kind is ManifoldKind.REGRASP and a.manifold.co_param == 0 for a in starts)


def test_slide_actions_change_manifold_pair(built):
    _, _, model, mdp = built
    trans = model.transitions
    for a in mdp.actions:
        if a.kind is ActionKind.INTRA and a.manifold.kind is ManifoldKind.SLIDE:
            ta, tb = trans[mdp.states[a.src].transition], trans[mdp.states[a.dst].transition]
            assert {ta.source, ta.target} != {tb.source, tb.target}


def test_built_mdp_has_a_policy(built):
    _, _, model, mdp = built
    seq = MdpTaskPlanner(mdp).next_sequence()
    kinds = [model.transitions[mdp.actions[a].transition].kind for a in seq.actions
             if mdp.actions[a].kind is ActionKind.INTER]
    assert kinds[-1] is TransitionKind.LIFT
    assert seq.tasks[-1].manifold.kind is ManifoldKind.TRANSFER


def test_no_transitions_no_policy(built):
    scene, session, model, _ = built
    empty = build_foliation(session.rated, [scene.start_placement])
    mdp = build_mdp(empty, scene.arm, scene.q_init, session.goal_pose())
    assert len(mdp.actions) == 0
    assert len(mdp.states) == 2 + len(mdp.targets)
    with pytest.raises(NoViablePolicy):
        MdpTaskPlanner(mdp).next_sequence()


def test_unreachable_goal_has_no_target(built):
    scene, session, model, _ = built
    with pytest.raises(NoTargetState):
        build_mdp(model, scene.arm, scene.q_init, session.goal_pose(), lambda mid, q: False)


def test_direct_pick_mdp_has_three_tasks():
    scene = _scene(post_bar(), 0.5, 0.4)
    session = _Session(scene)
    one = [next((g, q) for g, q in session.rated if q.high)]
    model = build_foliation(one, [scene.start_placement])
    session.use_model(model)
    model.transitions = sample_transitions(model, scene)
    mdp = build_mdp(model, scene.arm, scene.q_init, session.goal_pose(), session.target_ok)
    seq = MdpTaskPlanner(mdp).next_sequence()
    assert [t.manifold.kind for t in seq.tasks] == [ManifoldKind.REGRASP, ManifoldKind.SLIDE, ManifoldKind.TRANSFER]
    slide = seq.tasks[1]
    np.testing.assert_array_equal(slide.start, slide.end)  # no displacement on the table


def test_vanishing_rho_no_policy():
    mdp = hand_mdp([(0, 3, 0.5), (3, 2, 0.5)], 4, [2])
    for a in mdp.actions:
        a.rho = 1e-9
    with pytest.raises(NoViablePolicy):
        MdpTaskPlanner(mdp).next_sequence()


def test_success_idempotent_and_cached():
    mdp = hand_mdp([(0, 3, 0.5), (3, 2, 0.5)], 4, [2])
    traj = _dummy_traj()
    report_success(mdp, 0, traj)
    report_success(mdp, 0, traj)
    assert mdp.actions[0].rho == 1.0 and mdp.actions[0].solution is traj
    seq = MdpTaskPlanner(mdp).next_sequence()
    assert seq.actions[0] == 0 and mdp.actions[seq.actions[0]].solution is traj
