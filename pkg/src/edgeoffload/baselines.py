"""Fixed-tier baselines and exact optimal placement (enumeration and DP)."""

from __future__ import annotations

import csv
import io
import itertools

from .env_model import (
    LOCATIONS,
    EnvironmentSpec,
    Location,
    Workflow,
    as_plan,
    local_objective_f,
    plan_str,
    workflow_cost,
)

BRUTE_FORCE_CAP = 10


def fixed_plan(w: Workflow, tier: Location) -> tuple:
    return as_plan([tier] * len(w.tasks))


def brute_force_optimal(w: Workflow, env: EnvironmentSpec, cap: int = BRUTE_FORCE_CAP):
    """
    Price all ``3**N`` plans.  Plans are visited in lexicographic order and only
    a strictly cheaper plan replaces the incumbent.
    """
    n = len(w.tasks)
    if n > cap:
        raise ValueError(f"{n} tasks exceeds the enumeration cap of {cap}")
    best_plan, best = None, float("inf")
    for plan in itertools.product(LOCATIONS, repeat=n):
        obj = workflow_cost(w, plan, env).objective
        if obj < best:
            best_plan, best = plan, obj
    return as_plan(best_plan), best


def dp_optimal(w: Workflow, env: EnvironmentSpec):
    """
    Backward recursion over (task index, tier of the previous task)::

        cost_to_go[i][p] = min_a F(p, a; task i) + cost_to_go[i + 1][a]

    The forward pass takes the lowest tier among tied minimisers, which yields
    the lexicographically first optimal plan.
    """
    n = len(w.tasks)
    # togo[i][p]: best cost of tasks i..n-1 given task i-1 ran at p
    togo = [[0.0] * 3 for _ in range(n + 1)]
    choice = [[0] * 3 for _ in range(n)]
    for i in range(n - 1, -1, -1):
        inbound = w.inbound(i)
        for p in LOCATIONS:
            vals = [local_objective_f(p, inbound, w.tasks[i], a, env) + togo[i + 1][a] for a in LOCATIONS]
            m = min(vals)
            togo[i][p] = m
            choice[i][p] = vals.index(m)
    plan, prev = [], Location.DEVICE
    for i in range(n):
        a = choice[i][prev]
        plan.append(a)
        prev = Location(a)
    plan = as_plan(plan)
    return plan, workflow_cost(w, plan, env).objective


def oracle_csv(workflows, env: EnvironmentSpec, solver=dp_optimal) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("workflow_id", "plan", "objective"))
    for k, w in enumerate(workflows):
        plan, obj = solver(w, env)
        writer.writerow((k, plan_str(plan), repr(obj)))
    return buf.getvalue()
