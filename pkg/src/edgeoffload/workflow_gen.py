"""Random chain workflows drawn from the simulation setup's ranges."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .env_model import EdgeFlow, Task, Workflow


@dataclass(frozen=True)
class GenConfig:
    first_task_data_mb: tuple = (50.0, 100.0)
    later_task_data_mb: tuple = (10.0, 50.0)
    compute_demand: tuple = (1e3, 1e5)
    tasks_per_workflow: int = 5
    workflows_per_user: int = 5
    users: int = 4

    def __post_init__(self):
        for name in ("first_task_data_mb", "later_task_data_mb", "compute_demand"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.tasks_per_workflow < 1:
            raise ValueError("tasks_per_workflow must be >= 1")
        if self.workflows_per_user < 0 or self.users < 0:
            raise ValueError("workflow counts must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


def generate_workflow(rng: np.random.Generator, cfg: GenConfig) -> Workflow:
    """
    Draw one workflow.  Task 0 carries the large initial payload; the flow into
    task k+1 is that task's own payload size.
    """
    n = cfg.tasks_per_workflow
    data = np.empty(n)
    data[0] = rng.uniform(*cfg.first_task_data_mb)
    if n > 1:
        data[1:] = rng.uniform(*cfg.later_task_data_mb, size=n - 1)
    compute = rng.uniform(*cfg.compute_demand, size=n)
    tasks = tuple(Task(float(c), float(d)) for c, d in zip(compute, data))
    flows = tuple(EdgeFlow(float(d)) for d in data[1:])
    return Workflow(tasks, flows)


def generate_batch(rng: np.random.Generator, cfg: GenConfig) -> list:
    """``users * workflows_per_user`` workflows, user-major order."""
    return [generate_workflow(rng, cfg) for _ in range(cfg.users * cfg.workflows_per_user)]
