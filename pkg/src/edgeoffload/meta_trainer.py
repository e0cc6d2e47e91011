"""
Meta-initialization: train one Q-network while the environment keeps changing.

A single-unit engine walks generated workflows.  A fresh environment is drawn
for every workflow it interacts with and again for every replay step, where the
sampled transitions are re-priced under that environment before the update.
The network's final weights become the initialization for new engines.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional

import numpy as np

from . import rng as rngmod
from .drl_engine import Engine, TrainConfig
from .env_model import EnvironmentSpec
from .neuralnet import MlpParams, load_params, save_params
from .workflow_gen import GenConfig, generate_workflow

RANGED = ("c_local", "c_edge", "c_cloud", "b_device_edge", "b_edge_cloud", "b_device_cloud")
FIXED = ("d_local", "d_edge", "d_cloud", "alpha", "beta", "delta")


@dataclass(frozen=True)
class EnvRanges:
    ranges: dict  # name -> (low, high), for the capacity and bandwidth fields
    fixed: dict = field(default_factory=dict)  # name -> value for densities and weights

    def __post_init__(self):
        if set(self.ranges) != set(RANGED):
            raise ValueError(f"ranges must cover exactly {RANGED}")
        for name, (lo, hi) in self.ranges.items():
            if not 0 < lo <= hi:
                raise ValueError(f"{name}: need 0 < low <= high, got {(lo, hi)}")
        fixed = {"alpha": 1.0, "beta": 1.0, "delta": 1.0, **self.fixed}
        if set(fixed) != set(FIXED):
            raise ValueError(f"fixed values must cover exactly {FIXED}")
        object.__setattr__(self, "ranges", {k: (float(v[0]), float(v[1])) for k, v in self.ranges.items()})
        object.__setattr__(self, "fixed", {k: float(v) for k, v in fixed.items()})

    @classmethod
    def from_dict(cls, data: dict) -> "EnvRanges":
        return cls({k: tuple(data[k]) for k in RANGED}, {k: data[k] for k in FIXED if k in data})

    def to_dict(self) -> dict:
        return {**{k: list(v) for k, v in self.ranges.items()}, **self.fixed}

    @classmethod
    def collapsed(cls, env: EnvironmentSpec) -> "EnvRanges":
        """Ranges that only admit ``env``."""
        d = env.to_dict()
        return cls({k: (d[k], d[k]) for k in RANGED}, {k: d[k] for k in FIXED})

    def with_delta(self, delta: float) -> "EnvRanges":
        return EnvRanges(self.ranges, {**self.fixed, "delta": float(delta)})

    def midpoint(self) -> EnvironmentSpec:
        return EnvironmentSpec(**{k: (lo + hi) / 2 for k, (lo, hi) in self.ranges.items()}, **self.fixed)


def sample_environment(rng: np.random.Generator, ranges: EnvRanges) -> EnvironmentSpec:
    """Independent uniform draw of each ranged field, in a fixed field order."""
    drawn = {k: float(rng.uniform(*ranges.ranges[k])) for k in RANGED}
    return EnvironmentSpec(**drawn, **ranges.fixed)


@dataclass
class MetaParams:
    psi: MlpParams

    def save(self, path) -> None:
        save_params(self.psi, path)

    @classmethod
    def load(cls, path) -> "MetaParams":
        return cls(load_params(path))


def workflow_source(seed: int, cfg: GenConfig) -> Iterator:
    """Endless, reproducible stream of workflows for seed ``seed``."""
    g = rngmod.stream(seed, rngmod.WORKFLOWS)
    while True:
        yield generate_workflow(g, cfg)


def train_meta(
    cfg: TrainConfig,
    ranges: EnvRanges,
    workflow_cfg: GenConfig,
    seed: int,
    steps: int = 10_000,
    callback: Optional[Callable[[Engine], None]] = None,
) -> MetaParams:
    """
    Run ``steps`` interaction steps of single-unit training under randomly
    drawn environments and return the online network as meta-parameters.

    ``callback(engine)`` runs after every workflow.  Workflows come from
    ``workflow_source(seed, workflow_cfg)``, environments from the ``ENV``
    substream, so with ``ranges`` collapsed onto one environment the run is the
    same as a plain one-unit ``Engine`` fed the same workflows.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    env_rng = rngmod.stream(seed, rngmod.ENV)
    draw = lambda: sample_environment(env_rng, ranges)  # noqa: E731
    engine = Engine(ranges.midpoint(), replace(cfg, n_units=1), seed)
    for w in workflow_source(seed, workflow_cfg):
        if engine.interaction_steps >= steps:
            break
        engine.train_on_workflows([w], interaction_env=draw, replay_env=draw)
        if callback is not None:
            callback(engine)
    return MetaParams(engine.units[0].online.copy())
