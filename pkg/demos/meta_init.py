"""
Meta-initialization for a new environment
=========================================

Train one network while the capacities and bandwidths keep changing, then
start engines in an unseen environment from those weights and compare their
early loss with a random start.
"""

import numpy as np

from edgeoffload.drl_engine import Engine, TrainConfig
from edgeoffload.env_model import load_preset
from edgeoffload.meta_trainer import EnvRanges, train_meta
from edgeoffload.rng import stream
from edgeoffload.workflow_gen import GenConfig, generate_batch

cfg = TrainConfig(n_units=1)
ranges = EnvRanges.from_dict(load_preset("meta_train"))
meta = train_meta(cfg, ranges, GenConfig(), seed=0, steps=3000)

test_env = load_preset("meta_test")
workflows = generate_batch(stream(5), GenConfig())
for name, init in (("meta", meta.psi), ("random", None)):
    engine = Engine(test_env, cfg, seed=5, meta_params=init)
    while engine.train_steps < 100:
        engine.train_on_workflows(workflows)
    losses = engine.trace.losses(0)
    print(f"{name:6s} init: loss at step 1 {losses[0]:.2e}, "
          f"mean of steps 1-20 {losses[:20].mean():.2e}, steps 81-100 {losses[80:100].mean():.2e}")
