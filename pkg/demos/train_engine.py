"""
Training the multi-unit Q-learning engine
=========================================

Four units share one replay memory.  After training each unit proposes a
greedy plan and the cheapest one is used.
"""

import numpy as np

from edgeoffload.baselines import dp_optimal
from edgeoffload.drl_engine import Engine, TrainConfig
from edgeoffload.env_model import load_preset, plan_str
from edgeoffload.experiments import train_for
from edgeoffload.rng import stream
from edgeoffload.workflow_gen import GenConfig, generate_batch

env = load_preset("reference")
workflows = generate_batch(stream(1), GenConfig())
engine = Engine(env, TrainConfig(n_units=4), seed=1)

for budget in (50, 200, 400):
    train_for(engine, workflows, budget)
    loss = engine.trace.losses(0)[-50:].mean()
    mean = np.mean([engine.decide(w)[1].objective for w in workflows])
    print(f"after {engine.train_steps:3d} replay steps: unit-0 loss {loss:.2e}, "
          f"epsilon {engine.epsilon():.2f}, mean objective {mean:.3f}")

optimum = np.mean([dp_optimal(w, env)[1] for w in workflows])
print(f"optimal mean objective {optimum:.3f}")

w = workflows[0]
print("candidate plans:", [plan_str(p) for p in engine.candidate_plans(w)])
print("chosen:", plan_str(engine.decide(w)[0]), "optimal:", plan_str(dp_optimal(w, env)[0]))
