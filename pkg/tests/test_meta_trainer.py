from dataclasses import replace

import numpy as np
import pytest

from edgeoffload.drl_engine import Engine, TrainConfig
from edgeoffload.env_model import load_preset
from edgeoffload.meta_trainer import (
    RANGED,
    EnvRanges,
    MetaParams,
    sample_environment,
    train_meta,
    workflow_source,
)
from edgeoffload.rng import stream
from edgeoffload.workflow_gen import GenConfig

SMALL = TrainConfig(hidden=(16, 8), batch_size=16, memory_capacity=256, n_units=1)


def meta_ranges():
    return EnvRanges.from_dict(load_preset("meta_train"))


def test_collapsed_ranges_always_return_the_point(ref_env):
    ranges = EnvRanges.collapsed(ref_env)
    rng = stream(0)
    for _ in range(20):
        assert sample_environment(rng, ranges) == ref_env


def test_samples_stay_in_range():
    ranges = meta_ranges()
    rng = stream(1)
    for _ in range(10_000):
        env = sample_environment(rng, ranges)
        for k in RANGED:
            lo, hi = ranges.ranges[k]
            assert lo <= getattr(env, k) <= hi
        assert (env.d_local, env.d_edge, env.d_cloud) == (0.3, 0.15, 0.1)


def test_sampling_is_reproducible():
    ranges = meta_ranges()
    a = [sample_environment(stream(7), ranges) for _ in range(3)]
    b = [sample_environment(stream(7), ranges) for _ in range(3)]
    assert a == b


def test_range_validation():
    d = load_preset("meta_train")
    with pytest.raises(ValueError):
        EnvRanges.from_dict({**d, "c_edge": [60, 50]})
    bad = dict(meta_ranges().ranges)
    del bad["c_edge"]
    with pytest.raises(ValueError):
        EnvRanges(bad)


def test_ranges_roundtrip_and_midpoint():
    r = meta_ranges()
    assert EnvRanges.from_dict(r.to_dict()) == r
    mid = r.midpoint()
    assert mid.c_local == 20 and mid.b_device_cloud == 25
    assert r.with_delta(0.5).fixed["delta"] == 0.5


def test_collapsed_meta_training_equals_plain_engine(ref_env):
    gen = GenConfig()
    ranges = EnvRanges.collapsed(ref_env)
    snapshots = []
    train_meta(SMALL, ranges, gen, seed=3, steps=200,
               callback=lambda e: snapshots.append(e.units[0].online.copy()))
    plain = Engine(ref_env, SMALL, seed=3)
    source = workflow_source(3, gen)
    for snap in snapshots:
        plain.train_on_workflows([next(source)])
        assert plain.units[0].online.equals(snap)
    assert len(snapshots) == 40


def test_replay_repricing_leaves_memory_untouched():
    ranges = meta_ranges()
    seen = []

    def check(engine):
        n = len(engine.memory)
        seen.append(engine.memory._rewards[:n].copy())

    train_meta(SMALL, ranges, GenConfig(), seed=0, steps=100, callback=check)
    # rewards stored at interaction time never change on later replays
    for earlier, later in zip(seen, seen[1:]):
        assert np.array_equal(later[: len(earlier)], earlier)


def test_meta_params_shape_and_roundtrip(tmp_path):
    meta = train_meta(SMALL, meta_ranges(), GenConfig(), seed=0, steps=50)
    assert meta.psi.layer_sizes == SMALL.layer_sizes
    meta.save(tmp_path / "psi.json")
    assert MetaParams.load(tmp_path / "psi.json").psi.equals(meta.psi)
    cfg4 = replace(SMALL, n_units=4)
    eng = Engine(load_preset("reference"), cfg4, seed=1, meta_params=meta.psi)
    for u in eng.units:
        assert u.online.equals(meta.psi) and u.target.equals(meta.psi)
        assert u.online.weights[0] is not meta.psi.weights[0]


def test_meta_training_is_deterministic():
    a = train_meta(SMALL, meta_ranges(), GenConfig(), seed=9, steps=100)
    b = train_meta(SMALL, meta_ranges(), GenConfig(), seed=9, steps=100)
    assert a.psi.equals(b.psi)
