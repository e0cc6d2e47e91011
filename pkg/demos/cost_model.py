"""
Pricing a placement
===================

Build a three-task workflow, price a few placements on the reference
environment and split the cost into compute, transfer and energy.
"""

from edgeoffload.env_model import (
    EdgeFlow, Location, Task, Workflow, load_preset, local_objective_vector, plan_str, workflow_cost,
)

env = load_preset("reference")

# compute demand in M-cycles, payload in MB; flows carry data between neighbours
w = Workflow(
    [Task(4_000, 80), Task(25_000, 30), Task(60_000, 20)],
    [EdgeFlow(30), EdgeFlow(20)],
)

D, E, C = Location.DEVICE, Location.EDGE, Location.CLOUD
for plan in [(D, D, D), (E, E, E), (C, C, C), (D, E, C), (E, C, C)]:
    c = workflow_cost(w, plan, env)
    print(f"{plan_str(plan)}  compute {c.compute_delay_s:7.2f}s  transfer {c.transmit_delay_s:6.2f}s  "
          f"energy {c.energy_j:6.2f}J  objective {c.objective:7.2f}")

# the one-step cost of each tier for the second task, given the first ran on the edge
print("one-step costs after E:", [round(x, 3) for x in local_objective_vector(E, w.inbound(1), w.tasks[1], env)])

# delta trades delay against energy; at 0 only delay counts
for delta in (0.0, 1.0, 2.0):
    print(f"delta={delta}: all-cloud objective {workflow_cost(w, (C, C, C), env.with_delta(delta)).objective:.2f}")
