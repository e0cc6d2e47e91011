"""
Distributed deep Q-learning offloading engine.

``s`` parallel units each hold an online Q-network and a frozen target copy.
During training the workflow is walked task by task: every unit proposes an
epsilon-greedy action, unit 0's action is the one taken, the reward is derived
from the one-step cost of all three actions, and the transition goes into a
shared replay memory.  Every ``train_trigger`` pushes a minibatch is drawn and
every unit regresses toward its own target network's bootstrap value.  At
decision time each unit rolls out a greedy plan and the cheapest plan wins.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import rng as rngmod
from .env_model import (
    CostBreakdown,
    EnvironmentSpec,
    Location,
    Workflow,
    as_plan,
    local_objective_vector,
    workflow_cost,
)
from .env_model import EdgeFlow, Task
from .neuralnet import MlpParams, copy_into_target, forward, init_mlp, train_step
from .replay_memory import ReplayMemory, StepContext, Transition

COMPUTE_SCALE = 1e5  # M-cycles
MB_SCALE = 100.0
N_ACTIONS = 3


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    discount: float = 0.99
    batch_size: int = 128
    freeze_interval: int = 200
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 2000  # interaction steps
    hidden: tuple = (64, 32)
    n_units: int = 4
    memory_capacity: int = 4096
    train_trigger: int = 5  # pushes between replay steps
    max_tasks: int = 5
    # rewards enter the regression multiplied by this; argmax is unaffected
    reward_scale: float = 1e-3
    init_noise: float = 0.0  # std of noise added to meta-parameters per unit

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 < self.learning_rate <= 1:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0 <= self.discount <= 1:
            raise ValueError(f"discount must be in [0, 1], got {self.discount}")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        for name in ("batch_size", "freeze_interval", "n_units", "memory_capacity",
                     "train_trigger", "max_tasks", "epsilon_decay_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError("hidden sizes must be positive")
        if self.reward_scale <= 0 or self.init_noise < 0:
            raise ValueError("reward_scale must be > 0 and init_noise >= 0")

    @property
    def state_dim(self) -> int:
        return 3 * self.max_tasks + 1

    @property
    def layer_sizes(self) -> tuple:
        return (self.state_dim, *self.hidden, N_ACTIONS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


def build_state(w: Workflow, i: int, prev_action: int, max_tasks: int) -> np.ndarray:
    """
    State when placing task ``i`` (0-based)::

        [prev, inbound, c_i, d_i, flow_i, c_{i+1}, d_{i+1}, ..., c_N, d_N, 0, ...]

    ``prev`` is the tier of task ``i-1`` (0 for the first task), flows and
    payloads are divided by ``MB_SCALE`` and compute demands by
    ``COMPUTE_SCALE``.  The remaining slots are zero.
    """
    n = len(w.tasks)
    if n > max_tasks:
        raise ValueError(f"workflow has {n} tasks, state encodes at most {max_tasks}")
    if not 0 <= i < n:
        raise IndexError(f"task index {i} out of range for {n} tasks")
    s = np.zeros(3 * max_tasks + 1)
    s[0] = float(prev_action) if i > 0 else 0.0
    s[1] = w.flows[i - 1].transfer_mb / MB_SCALE if i > 0 else 0.0
    pos = 2
    for k in range(i, n):
        if k > i:
            s[pos] = w.flows[k - 1].transfer_mb / MB_SCALE
            pos += 1
        s[pos] = w.tasks[k].compute_demand / COMPUTE_SCALE
        s[pos + 1] = w.tasks[k].data_size / MB_SCALE
        pos += 2
    return s


@dataclass
class DnnUnit:
    online: MlpParams
    target: MlpParams
    rng: np.random.Generator = field(repr=False)
    steps_since_freeze: int = 0


def select_action(unit: DnnUnit, state: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the online network; argmax ties go to the lowest index."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(forward(unit.online, state)))


def compute_reward(f_values, chosen: int) -> float:
    """
    ``-min(F)`` if ``chosen`` attains the minimum one-step cost, else ``-max(F)``.
    """
    f = np.asarray(f_values, dtype=float)
    if f.shape != (N_ACTIONS,) or not np.all(np.isfinite(f)):
        raise ValueError(f"need {N_ACTIONS} finite costs, got {f_values!r}")
    fmin = f.min()
    if f[chosen] == fmin:
        return float(-fmin)
    return float(-f.max())


def q_target(reward: float, next_state, unit: DnnUnit, mu: float, terminal: bool) -> float:
    if terminal:
        return float(reward)
    return float(reward + mu * np.max(forward(unit.target, next_state)))


def step_context(w: Workflow, i: int, prev: int) -> StepContext:
    task = w.tasks[i]
    inbound = None if i == 0 else w.flows[i - 1].transfer_mb
    return StepContext(int(prev) if i > 0 else 0, inbound, task.compute_demand, task.data_size)


def context_costs(ctx: StepContext, env: EnvironmentSpec) -> tuple:
    """One-step costs of the three actions for a stored step."""
    flow = None if ctx.inbound_mb is None else EdgeFlow(ctx.inbound_mb)
    return local_objective_vector(Location(ctx.prev), flow, Task(ctx.compute_demand, ctx.data_size), env)


class TrainingTrace:
    """Per (replay step, unit) loss records."""

    HEADER = ("step", "unit", "loss", "epsilon", "freeze_flag")

    def __init__(self):
        self.rows = []

    def append(self, step, unit, loss, epsilon, freeze):
        self.rows.append((int(step), int(unit), float(loss), float(epsilon), bool(freeze)))

    def extend(self, other: "TrainingTrace"):
        self.rows.extend(other.rows)

    def __len__(self):
        return len(self.rows)

    def losses(self, unit: int = 0) -> np.ndarray:
        return np.array([r[2] for r in self.rows if r[1] == unit])

    def freeze_steps(self) -> list:
        return sorted({r[0] for r in self.rows if r[4]})

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.HEADER)
        for step, unit, loss, eps, freeze in self.rows:
            writer.writerow((step, unit, repr(loss), repr(eps), int(freeze)))
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


class Engine:
    """
    Engine state: the units, the shared replay memory, counters and streams.

    Each unit draws from its own substream ``(UNIT, j)`` so unit ``j`` behaves
    identically whatever the number of units; minibatch indices come from the
    ``REPLAY`` substream.
    """

    def __init__(self, env: EnvironmentSpec, cfg: TrainConfig = TrainConfig(), seed: int = 0,
                 meta_params: Optional[MlpParams] = None):
        self.env = env
        self.cfg = cfg
        self.seed = int(seed)
        self.units = []
        for j in range(cfg.n_units):
            unit_rng = rngmod.stream(seed, rngmod.UNIT, j)
            if meta_params is None:
                online = init_mlp(cfg.layer_sizes, unit_rng)
            else:
                if meta_params.layer_sizes != cfg.layer_sizes:
                    raise ValueError(
                        f"meta-parameters have layers {meta_params.layer_sizes}, "
                        f"engine expects {cfg.layer_sizes}"
                    )
                online = meta_params.copy()
                if cfg.init_noise > 0:
                    for a in online.weights + online.biases:
                        a += unit_rng.normal(0.0, cfg.init_noise, size=a.shape)
            self.units.append(DnnUnit(online, online.copy(), unit_rng))
        self.memory = ReplayMemory(cfg.memory_capacity, cfg.state_dim)
        self.replay_rng = rngmod.stream(seed, rngmod.REPLAY)
        self.interaction_steps = 0
        self.train_steps = 0
        self.trace = TrainingTrace()

    def epsilon(self) -> float:
        c = self.cfg
        if self.interaction_steps >= c.epsilon_decay_steps:
            return c.epsilon_end
        frac = self.interaction_steps / c.epsilon_decay_steps
        return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac

    def state(self, w: Workflow, i: int, prev: int) -> np.ndarray:
        return build_state(w, i, prev, self.cfg.max_tasks)

    def train_on_workflows(
        self,
        workflows,
        *,
        interaction_env: Optional[Callable[[], EnvironmentSpec]] = None,
        replay_env: Optional[Callable[[], EnvironmentSpec]] = None,
    ) -> TrainingTrace:
        """
        One pass over ``workflows``.  ``interaction_env`` (called once per
        workflow) and ``replay_env`` (called once per replay step) override the
        engine's environment; with ``replay_env`` set, rewards of the sampled
        transitions are re-priced under the returned environment.
        """
        trace = TrainingTrace()
        for w in workflows:
            env = interaction_env() if interaction_env is not None else self.env
            n = len(w.tasks)
            prev = 0
            s = self.state(w, 0, 0)
            for i in range(n):
                eps = self.epsilon()
                proposals = [select_action(u, s, eps, u.rng) for u in self.units]
                a = proposals[0]
                ctx = step_context(w, i, prev)
                r = compute_reward(context_costs(ctx, env), a)
                terminal = i == n - 1
                s_next = np.zeros_like(s) if terminal else self.state(w, i + 1, a)
                self.memory.push(Transition(s, a, r, s_next, terminal, ctx))
                self.interaction_steps += 1
                if self.memory.pushes % self.cfg.train_trigger == 0:
                    self._replay(trace, eps, replay_env)
                prev, s = a, s_next
        self.trace.extend(trace)
        return trace

    def _replay(self, trace: TrainingTrace, eps: float, replay_env) -> None:
        cfg = self.cfg
        batch = self.memory.sample_arrays(cfg.batch_size, self.replay_rng)
        rewards = batch.rewards
        if replay_env is not None:
            env = replay_env()
            rewards = np.array([
                compute_reward(context_costs(self.memory.context(slot), env), a)
                for slot, a in zip(batch.index, batch.actions)
            ])
        r = rewards * cfg.reward_scale
        self.train_steps += 1
        freeze = self.train_steps % cfg.freeze_interval == 0
        for j, unit in enumerate(self.units):
            q_next = forward(unit.target, batch.next_states).max(axis=1)
            y = np.where(batch.terminal, r, r + cfg.discount * q_next)
            loss = train_step(unit.online, batch.states, batch.actions, y, cfg.learning_rate)
            unit.steps_since_freeze += 1
            if freeze:
                copy_into_target(unit.online, unit.target)
                unit.steps_since_freeze = 0
            trace.append(self.train_steps, j, loss, eps, freeze)

    def greedy_plan(self, unit: DnnUnit, w: Workflow) -> tuple:
        prev = 0
        plan = []
        for i in range(len(w.tasks)):
            a = int(np.argmax(forward(unit.online, self.state(w, i, prev))))
            plan.append(a)
            prev = a
        return as_plan(plan)

    def candidate_plans(self, w: Workflow) -> list:
        return [self.greedy_plan(u, w) for u in self.units]

    def decide(self, w: Workflow):
        """Cheapest of the units' greedy plans (lowest unit index on ties)."""
        best = None
        for plan in self.candidate_plans(w):
            cost = workflow_cost(w, plan, self.env)
            if best is None or cost.objective < best[1].objective:
                best = (plan, cost)
        return best

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "cfg": self.cfg.to_dict(),
            "seed": self.seed,
            "interaction_steps": self.interaction_steps,
            "train_steps": self.train_steps,
            "units": [
                {"online": u.online.to_dict(), "target": u.target.to_dict(),
                 "steps_since_freeze": u.steps_since_freeze}
                for u in self.units
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Engine":
        """
        Restore parameters and counters.  Random streams restart from the seed
        and the replay memory starts empty.
        """
        with open(path) as fh:
            data = json.load(fh)
        eng = cls(EnvironmentSpec.from_dict(data["env"]), TrainConfig.from_dict(data["cfg"]), data["seed"])
        if len(data["units"]) != len(eng.units):
            raise ValueError("checkpoint unit count does not match its config")
        for unit, ud in zip(eng.units, data["units"]):
            unit.online = MlpParams.from_dict(ud["online"])
            unit.target = MlpParams.from_dict(ud["target"])
            unit.steps_since_freeze = ud["steps_since_freeze"]
        eng.interaction_steps = data["interaction_steps"]
        eng.train_steps = data["train_steps"]
        return eng


def with_units(cfg: TrainConfig, n_units: int) -> TrainConfig:
    return replace(cfg, n_units=n_units)


def decide(engine: Engine, w: Workflow):
    return engine.decide(w)


def train_on_workflows(engine: Engine, batch) -> TrainingTrace:
    return engine.train_on_workflows(batch)
