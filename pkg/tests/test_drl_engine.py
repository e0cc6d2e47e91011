from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

from edgeoffload.drl_engine import (
    DnnUnit,
    Engine,
    TrainConfig,
    build_state,
    compute_reward,
    context_costs,
    q_target,
    select_action,
    step_context,
)
from edgeoffload.env_model import EdgeFlow, Task, Workflow, local_objective_vector, workflow_cost, Location
from edgeoffload.neuralnet import MlpParams, init_mlp
from edgeoffload.rng import stream
from edgeoffload.workflow_gen import GenConfig, generate_batch

SMALL = TrainConfig(hidden=(16, 8), batch_size=16, memory_capacity=256, n_units=1)


def constant_unit(q, state_dim=16):
    """A unit whose network ignores its input and outputs ``q``."""
    sizes = (state_dim, 4, 3)
    p = MlpParams(sizes, [np.zeros((4, state_dim)), np.zeros((3, 4))], [np.zeros(4), np.array(q, float)])
    return DnnUnit(p, p.copy(), stream(0))


def wf(n=3):
    tasks = [Task(1000.0 * (k + 1), 10.0 * (k + 1)) for k in range(n)]
    return Workflow(tasks, [EdgeFlow(5.0 * (k + 1)) for k in range(n - 1)])


def test_state_layout():
    w = wf(3)
    s0 = build_state(w, 0, 2, max_tasks=5)
    assert s0.shape == (16,)
    # prev and inbound are zero for the first task
    assert list(s0[:10]) == pytest.approx([0, 0, 0.01, 0.1, 0.05, 0.02, 0.2, 0.1, 0.03, 0.3])
    assert list(s0[10:]) == [0.0] * 6
    s1 = build_state(w, 1, 2, max_tasks=5)
    assert list(s1[:5]) == pytest.approx([2, 0.05, 0.02, 0.2, 0.1])
    s2 = build_state(w, 2, 1, max_tasks=5)
    assert list(s2[:4]) == pytest.approx([1, 0.1, 0.03, 0.3]) and not s2[4:].any()


def test_state_slot_map():
    # every populated slot moves with exactly one workflow quantity
    w = wf(5)
    base = build_state(w, 0, 0, 5)
    changed = set()
    for k in range(5):
        t = list(w.tasks)
        t[k] = Task(t[k].compute_demand * 2, t[k].data_size)
        diff = np.flatnonzero(build_state(Workflow(t, w.flows), 0, 0, 5) != base)
        assert len(diff) == 1 and diff[0] not in changed
        changed.add(diff[0])
        t = list(w.tasks)
        t[k] = Task(t[k].compute_demand, t[k].data_size * 2)
        diff = np.flatnonzero(build_state(Workflow(t, w.flows), 0, 0, 5) != base)
        assert len(diff) == 1 and diff[0] not in changed
        changed.add(diff[0])
    assert changed | {1} | {4, 7, 10, 13} == set(range(1, 16))


def test_state_rejects_oversized_workflow():
    with pytest.raises(ValueError):
        build_state(wf(6), 0, 0, 5)
    with pytest.raises(IndexError):
        build_state(wf(3), 3, 0, 5)


def test_greedy_selection_and_ties():
    s = np.zeros(16)
    assert select_action(constant_unit([5, 1, 1]), s, 0.0, stream(0)) == 0
    assert select_action(constant_unit([1, 5, 5]), s, 0.0, stream(0)) == 1
    assert select_action(constant_unit([2, 2, 2]), s, 0.0, stream(0)) == 0
    with pytest.raises(ValueError):
        select_action(constant_unit([0, 0, 0]), s, 1.5, stream(0))


def test_full_exploration_is_uniform():
    unit, rng = constant_unit([5, 1, 1]), stream(3)
    counts = np.bincount([select_action(unit, np.zeros(16), 1.0, rng) for _ in range(30_000)], minlength=3)
    assert chisquare(counts).pvalue > 0.001


def test_reward_examples():
    assert compute_reward([2, 5, 7], 0) == -2
    assert compute_reward([2, 5, 7], 2) == -7
    assert compute_reward([2, 5, 7], 1) == -7
    assert compute_reward([3, 3, 9], 1) == -3
    with pytest.raises(ValueError):
        compute_reward([1, np.inf, 2], 0)


def test_reward_is_one_of_the_extremes():
    rng = stream(4)
    for _ in range(500):
        f = rng.uniform(0, 10, 3)
        a = int(rng.integers(3))
        r = compute_reward(f, a)
        assert r in (-f.min(), -f.max())
        assert (r == -f.min()) == (a == int(np.argmin(f)))


def test_q_target_examples():
    unit = constant_unit([-1, -4, -2])
    s = np.zeros(16)
    assert q_target(-3, s, unit, 0.9, terminal=True) == -3
    assert q_target(-3, s, unit, 0.9, terminal=False) == pytest.approx(-3.9)
    assert q_target(-3, s, unit, 0.0, terminal=False) == -3


def test_context_costs_match_cost_model(ref_env):
    w = wf(3)
    for i in range(3):
        ctx = step_context(w, i, 2)
        expected = local_objective_vector(Location(2) if i else Location(0), w.inbound(i), w.tasks[i], ref_env)
        assert context_costs(ctx, ref_env) == expected


def test_single_task_transitions_are_terminal(ref_env):
    eng = Engine(ref_env, SMALL, seed=0)
    ws = [Workflow([Task(1000.0 * (k + 1), 10.0)], []) for k in range(10)]
    eng.train_on_workflows(ws)
    assert len(eng.memory) == 10 and eng.memory._terminal[:10].all()
    assert not eng.memory._next[:10].any()
    assert eng.train_steps == 2


def test_replay_trigger_and_freeze_schedule(ref_env):
    cfg = replace(SMALL, freeze_interval=3, n_units=2)
    eng = Engine(ref_env, cfg, seed=1)
    ws = generate_batch(stream(0), GenConfig())
    eng.train_on_workflows(ws)
    assert eng.interaction_steps == 100 and eng.train_steps == 20
    assert eng.trace.freeze_steps() == [3, 6, 9, 12, 15, 18]
    assert len(eng.trace) == 40
    # targets were copied at step 18 and have not moved since
    for u in eng.units:
        assert u.steps_since_freeze == 2 and not u.target.equals(u.online)


def test_epsilon_schedule(ref_env):
    eng = Engine(ref_env, replace(SMALL, epsilon_decay_steps=100), seed=0)
    assert eng.epsilon() == 1.0
    eng.interaction_steps = 50
    assert eng.epsilon() == pytest.approx(0.525)
    eng.interaction_steps = 1000
    assert eng.epsilon() == 0.05


def test_training_is_deterministic(ref_env):
    ws = generate_batch(stream(0), GenConfig())
    runs = []
    for _ in range(2):
        eng = Engine(ref_env, replace(SMALL, n_units=2), seed=5)
        eng.train_on_workflows(ws)
        runs.append(eng)
    a, b = runs
    assert a.trace.to_csv() == b.trace.to_csv()
    assert all(u.online.equals(v.online) for u, v in zip(a.units, b.units))


def test_unit_zero_does_not_depend_on_unit_count(ref_env):
    ws = generate_batch(stream(0), GenConfig())
    one = Engine(ref_env, SMALL, seed=3)
    four = Engine(ref_env, replace(SMALL, n_units=4), seed=3)
    one.train_on_workflows(ws)
    four.train_on_workflows(ws)
    assert one.units[0].online.equals(four.units[0].online)
    assert list(one.trace.losses(0)) == list(four.trace.losses(0))


def test_decide_picks_cheapest_candidate(ref_env):
    eng = Engine(ref_env, replace(SMALL, n_units=4), seed=2)
    eng.train_on_workflows(generate_batch(stream(1), GenConfig()))
    for w in generate_batch(stream(2), GenConfig()):
        plan, cost = eng.decide(w)
        costs = [workflow_cost(w, p, ref_env).objective for p in eng.candidate_plans(w)]
        assert cost.objective == min(costs)
        assert plan == eng.candidate_plans(w)[costs.index(min(costs))]


def test_single_unit_decide_is_greedy_rollout(ref_env):
    eng = Engine(ref_env, SMALL, seed=2)
    w = wf(4)
    assert eng.decide(w)[0] == eng.greedy_plan(eng.units[0], w)


def test_identical_units_decide_alike(ref_env):
    p = init_mlp(SMALL.layer_sizes, stream(0))
    one = Engine(ref_env, SMALL, seed=0, meta_params=p)
    four = Engine(ref_env, replace(SMALL, n_units=4), seed=0, meta_params=p)
    for w in generate_batch(stream(3), GenConfig()):
        assert one.decide(w) == four.decide(w)


def test_meta_params_shape_checked(ref_env):
    with pytest.raises(ValueError):
        Engine(ref_env, SMALL, meta_params=init_mlp((16, 4, 3), stream(0)))


def test_fixed_workflow_converges_from_trained_start(ref_env):
    cfg = replace(TrainConfig(), n_units=1)
    pre = Engine(ref_env, cfg, seed=0)
    ws = generate_batch(stream(0), GenConfig())
    while pre.interaction_steps < 2000:
        pre.train_on_workflows(ws)
    greedy = replace(cfg, epsilon_start=0.0, epsilon_end=0.0)
    eng = Engine(ref_env, greedy, seed=1, meta_params=pre.units[0].online)
    w = ws[0]
    while eng.train_steps < 2000 and (len(eng.trace) == 0 or eng.trace.losses()[-1] >= 1e-3):
        eng.train_on_workflows([w])
    assert eng.trace.losses()[-1] < 1e-3


def test_checkpoint_roundtrip(ref_env, tmp_path):
    eng = Engine(ref_env, replace(SMALL, n_units=2), seed=4)
    eng.train_on_workflows(generate_batch(stream(0), GenConfig()))
    eng.save(tmp_path / "engine.json")
    back = Engine.load(tmp_path / "engine.json")
    assert back.train_steps == eng.train_steps and back.interaction_steps == eng.interaction_steps
    for u, v in zip(eng.units, back.units):
        assert u.online.equals(v.online) and u.target.equals(v.target)
    w = wf(5)
    assert back.decide(w) == eng.decide(w)
