import numpy as np
import pytest
from hypothesis import given, settings

from edgeoffload.baselines import brute_force_optimal, dp_optimal, fixed_plan, oracle_csv
from edgeoffload.env_model import (
    LOCATIONS,
    EdgeFlow,
    EnvironmentSpec,
    Location,
    Task,
    Workflow,
    workflow_cost,
)
from edgeoffload.meta_trainer import RANGED

from conftest import envs, random_env, random_workflow, workflows

D, E, C = Location.DEVICE, Location.EDGE, Location.CLOUD


def test_single_task_goes_to_cloud(ref_env):
    w = Workflow([Task(30, 10)], [])
    # device 1 + 3, edge 30/70 + 1.5, cloud 0.2 + 1
    plan, obj = brute_force_optimal(w, ref_env)
    assert plan == (C,) and obj == pytest.approx(1.2)
    assert dp_optimal(w, ref_env) == (plan, obj)


def test_oracle_beats_every_fixed_plan(ref_env):
    rng = np.random.default_rng(0)
    for _ in range(50):
        w = random_workflow(rng, 5)
        _, best = dp_optimal(w, ref_env)
        for tier in LOCATIONS:
            assert best <= workflow_cost(w, fixed_plan(w, tier), ref_env).objective


def test_dp_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(200):
        env = random_env(rng)
        w = random_workflow(rng, int(rng.integers(1, 7)))
        bp, bobj = brute_force_optimal(w, env)
        dp, dobj = dp_optimal(w, env)
        assert dobj == pytest.approx(bobj, rel=1e-9)
        if dp != bp:
            # only allowed when the two plans tie within rounding
            assert workflow_cost(w, dp, env).objective == pytest.approx(bobj, rel=1e-9)


def test_ties_resolve_to_lowest_tier():
    env = EnvironmentSpec(10, 10, 10, 1e9, 1e9, 1e9, 1, 1, 1, 1, 1, 1)
    w = Workflow([Task(10, 1), Task(10, 1)], [EdgeFlow(0)])
    assert brute_force_optimal(w, env)[0] == (D, D)
    assert dp_optimal(w, env)[0] == (D, D)


@settings(max_examples=100, deadline=None)
@given(w=workflows(max_tasks=5), env=envs)
def test_better_links_never_hurt(w, env):
    _, base = dp_optimal(w, env)
    d = env.to_dict()
    faster = EnvironmentSpec(**{**d, **{k: d[k] * 2 for k in RANGED if k.startswith("b_")}})
    assert dp_optimal(w, faster)[1] <= base * (1 + 1e-12)


def test_enumeration_cap():
    w = Workflow([Task(1, 1)] * 11, [EdgeFlow(1)] * 10)
    with pytest.raises(ValueError):
        brute_force_optimal(w, EnvironmentSpec(1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1))


def test_oracle_csv(ref_env):
    text = oracle_csv([Workflow([Task(30, 10)], [])], ref_env)
    assert text.splitlines() == ["workflow_id,plan,objective", "0,C,1.2"]
