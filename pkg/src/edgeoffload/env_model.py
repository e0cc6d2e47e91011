"""
Analytic cost model for a three-tier device / edge / cloud system.

A workflow is a chain of tasks ``v_1 .. v_N`` joined by data flows.  Each task
is placed on one tier; placing consecutive tasks on different tiers costs a
transfer over the link between those tiers.  Energy is charged per MB of task
payload at the executing tier, with the edge and cloud contributions scaled
by ``alpha`` and ``beta``.  The scalar objective of a placement is

    total_delay + delta * weighted_energy

All functions here are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from enum import IntEnum
from importlib import resources
from typing import Optional, Sequence


class Location(IntEnum):
    DEVICE = 0
    EDGE = 1
    CLOUD = 2


LOCATIONS = (Location.DEVICE, Location.EDGE, Location.CLOUD)

# A plan is one Location per task, in workflow order.
Plan = tuple


class CostModelError(ValueError):
    pass


@dataclass(frozen=True)
class EnvironmentSpec:
    """
    Compute capacities (MHz), link bandwidths (MB/s), energy densities (J/MB)
    and the objective weights.
    """

    c_local: float
    c_edge: float
    c_cloud: float
    b_device_edge: float
    b_edge_cloud: float
    b_device_cloud: float
    d_local: float
    d_edge: float
    d_cloud: float
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise CostModelError(f"{f.name} must be a finite number, got {value!r}")
            if f.name in ("alpha", "beta", "delta"):
                if value < 0:
                    raise CostModelError(f"{f.name} must be >= 0, got {value}")
            elif value <= 0:
                raise CostModelError(f"{f.name} must be > 0, got {value}")

    def capacity(self, loc: Location) -> float:
        return (self.c_local, self.c_edge, self.c_cloud)[loc]

    def density(self, loc: Location) -> float:
        return (self.d_local, self.d_edge, self.d_cloud)[loc]

    def energy_weight(self, loc: Location) -> float:
        return (1.0, self.alpha, self.beta)[loc]

    def bandwidth(self, a: Location, b: Location) -> float:
        pair = frozenset((int(a), int(b)))
        if pair == {0, 1}:
            return self.b_device_edge
        if pair == {1, 2}:
            return self.b_edge_cloud
        if pair == {0, 2}:
            return self.b_device_cloud
        raise CostModelError(f"no link between {a!r} and {b!r}")

    def with_delta(self, delta: float) -> "EnvironmentSpec":
        return replace(self, delta=float(delta))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EnvironmentSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise CostModelError(f"unknown environment fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentSpec":
        return cls.from_dict(json.loads(text))


def load_preset(name: str):
    """
    Load a bundled preset: ``reference``, ``meta_test`` (EnvironmentSpec) or
    ``meta_train`` (raw dict of ranges, see ``meta_trainer.EnvRanges``).
    """
    text = resources.files("edgeoffload.presets").joinpath(f"{name}.json").read_text()
    data = json.loads(text)
    if name == "meta_train":
        return data
    return EnvironmentSpec.from_dict(data)


@dataclass(frozen=True)
class Task:
    compute_demand: float  # M-cycles
    data_size: float  # MB

    def __post_init__(self):
        if not (self.compute_demand > 0 and math.isfinite(self.compute_demand)):
            raise CostModelError(f"compute_demand must be > 0, got {self.compute_demand}")
        if not (self.data_size > 0 and math.isfinite(self.data_size)):
            raise CostModelError(f"data_size must be > 0, got {self.data_size}")


@dataclass(frozen=True)
class EdgeFlow:
    transfer_mb: float

    def __post_init__(self):
        if not (self.transfer_mb >= 0 and math.isfinite(self.transfer_mb)):
            raise CostModelError(f"transfer_mb must be >= 0, got {self.transfer_mb}")


@dataclass(frozen=True)
class Workflow:
    """Chain of tasks; ``flows[k]`` carries data from ``tasks[k]`` to ``tasks[k + 1]``."""

    tasks: tuple
    flows: tuple

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "flows", tuple(self.flows))
        if len(self.tasks) < 1:
            raise CostModelError("a workflow needs at least one task")
        if len(self.flows) != len(self.tasks) - 1:
            raise CostModelError(
                f"{len(self.tasks)} tasks need {len(self.tasks) - 1} flows, got {len(self.flows)}"
            )

    def __len__(self):
        return len(self.tasks)

    def inbound(self, i: int) -> Optional[EdgeFlow]:
        """Flow entering task ``i`` (0-based), ``None`` for the first task."""
        return self.flows[i - 1] if i > 0 else None

    def to_dict(self) -> dict:
        return {
            "tasks": [asdict(t) for t in self.tasks],
            "flows": [asdict(f) for f in self.flows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Workflow":
        return cls(
            tasks=tuple(Task(float(t["compute_demand"]), float(t["data_size"])) for t in data["tasks"]),
            flows=tuple(EdgeFlow(float(f["transfer_mb"])) for f in data["flows"]),
        )


def workflows_to_json(workflows: Sequence[Workflow]) -> str:
    return json.dumps([w.to_dict() for w in workflows], indent=1)


def workflows_from_json(text: str) -> list:
    return [Workflow.from_dict(d) for d in json.loads(text)]


@dataclass(frozen=True)
class CostBreakdown:
    compute_delay_s: float
    transmit_delay_s: float
    total_delay_s: float
    energy_j: float
    objective: float


def as_plan(decisions) -> Plan:
    return tuple(Location(int(d)) for d in decisions)


def plan_str(plan) -> str:
    """Compact label, e.g. ``"DEC"`` for device, edge, cloud."""
    return "".join("DEC"[int(d)] for d in plan)


def compute_delay(task: Task, dec: Location, env: EnvironmentSpec) -> float:
    return task.compute_demand / env.capacity(dec)


def transmission_delay(flow: EdgeFlow, src: Location, dst: Location, env: EnvironmentSpec) -> float:
    if int(src) == int(dst):
        return 0.0
    return flow.transfer_mb / env.bandwidth(src, dst)


def task_energy(task: Task, dec: Location, env: EnvironmentSpec) -> float:
    """Unweighted execution energy; transfers consume none."""
    return task.data_size * env.density(dec)


def weighted_energy(task: Task, dec: Location, env: EnvironmentSpec) -> float:
    return env.energy_weight(dec) * task_energy(task, dec, env)


def local_objective_f(
    prev: Location,
    inbound_flow: Optional[EdgeFlow],
    task: Task,
    action: Location,
    env: EnvironmentSpec,
) -> float:
    """
    One-step cost of running ``task`` at ``action`` when its predecessor ran at
    ``prev``: compute delay + inbound transfer delay + delta * weighted energy.
    The first task of a workflow has no inbound flow and pays no transfer.
    """
    transmit = 0.0 if inbound_flow is None else transmission_delay(inbound_flow, prev, action, env)
    return compute_delay(task, action, env) + transmit + env.delta * weighted_energy(task, action, env)


def local_objective_vector(prev, inbound_flow, task, env) -> tuple:
    """``local_objective_f`` for each of the three actions."""
    return tuple(local_objective_f(prev, inbound_flow, task, a, env) for a in LOCATIONS)


def workflow_cost(workflow: Workflow, plan, env: EnvironmentSpec) -> CostBreakdown:
    if len(plan) != len(workflow.tasks):
        raise CostModelError(f"plan has {len(plan)} decisions for {len(workflow.tasks)} tasks")
    compute = transmit = energy = 0.0
    prev = None
    for i, (task, dec) in enumerate(zip(workflow.tasks, plan)):
        dec = Location(int(dec))
        c = compute_delay(task, dec, env)
        t = 0.0 if i == 0 else transmission_delay(workflow.flows[i - 1], prev, dec, env)
        e = weighted_energy(task, dec, env)
        compute += c
        transmit += t
        energy += e
        prev = dec
    total = compute + transmit
    return CostBreakdown(
        compute_delay_s=compute,
        transmit_delay_s=transmit,
        total_delay_s=total,
        energy_j=energy,
        objective=total + env.delta * energy,
    )


def objective_q(workflows: Sequence[Workflow], plans: Sequence, env: EnvironmentSpec) -> float:
    if len(workflows) != len(plans):
        raise CostModelError(f"{len(workflows)} workflows but {len(plans)} plans")
    return math.fsum(workflow_cost(w, p, env).objective for w, p in zip(workflows, plans))
