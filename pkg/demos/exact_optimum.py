"""
Exact placement by enumeration and by dynamic programming
=========================================================

Both solvers return the cheapest plan; the DP scales linearly in the number
of tasks while enumeration visits all 3**N plans.
"""

import time

from edgeoffload.baselines import brute_force_optimal, dp_optimal, fixed_plan
from edgeoffload.env_model import LOCATIONS, EnvironmentSpec, load_preset, plan_str, workflow_cost
from edgeoffload.rng import stream
from edgeoffload.workflow_gen import GenConfig, generate_batch

env = load_preset("reference")
workflows = generate_batch(stream(0), GenConfig(tasks_per_workflow=8, users=1, workflows_per_user=5))

for k, w in enumerate(workflows):
    t0 = time.perf_counter()
    bp, bobj = brute_force_optimal(w, env)
    t1 = time.perf_counter()
    dp, dobj = dp_optimal(w, env)
    t2 = time.perf_counter()
    fixed = {loc.name.lower(): workflow_cost(w, fixed_plan(w, loc), env).objective for loc in LOCATIONS}
    print(f"workflow {k}: optimum {plan_str(dp)} = {dobj:.2f} "
          f"(enumeration {1e3 * (t1 - t0):.0f} ms, DP {1e3 * (t2 - t1):.2f} ms, same plan: {bp == dp})")
    print("   fixed tiers:", {name: round(v, 2) for name, v in fixed.items()})

# when the cloud is barely faster than the edge and the edge-cloud link is wide,
# light tasks move to the cloud for its lower energy density and heavy ones stay on the edge
for c_cloud in (67.0, 69.0, 69.5):
    close = EnvironmentSpec(**{**env.to_dict(), "c_cloud": c_cloud, "b_edge_cloud": 2000.0})
    print(f"cloud capacity {c_cloud}: {plan_str(dp_optimal(workflows[0], close)[0])}")
