"""
Experiment runners behind the command line.

Each runner takes a plain config dict (the parsed JSON document), returns an
``ExperimentResult`` holding CSV tables and a summary, and never touches the
filesystem; ``write_result`` does that.  All randomness is derived from the
config's master seed, so a rerun produces byte-identical CSVs.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .baselines import brute_force_optimal, dp_optimal, fixed_plan
from .drl_engine import Engine, TrainConfig
from .env_model import (
    LOCATIONS,
    EnvironmentSpec,
    load_preset,
    plan_str,
    workflow_cost,
    workflows_from_json,
)
from .meta_trainer import EnvRanges, MetaParams, train_meta
from .workflow_gen import GenConfig, generate_batch

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentResult:
    name: str
    config: dict
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    summary: dict = field(default_factory=dict)
    blobs: dict = field(default_factory=dict)  # file name -> text (checkpoints)

    def csv_text(self, name: str) -> str:
        header, rows = self.tables[name]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


# -- config resolution -------------------------------------------------------

def _env(spec, delta=None) -> EnvironmentSpec:
    try:
        env = load_preset(spec) if isinstance(spec, str) else EnvironmentSpec.from_dict(spec)
    except FileNotFoundError:
        raise ConfigError(f"unknown environment preset {spec!r}") from None
    if not isinstance(env, EnvironmentSpec):
        raise ConfigError(f"{spec!r} is not an environment")
    return env if delta is None else env.with_delta(delta)


def _ranges(spec) -> EnvRanges:
    return EnvRanges.from_dict(load_preset(spec) if isinstance(spec, str) else spec)


def resolve_config(cfg: dict, defaults: dict, seed=None) -> dict:
    """Merge ``cfg`` over ``defaults`` (one level deep) and apply a seed override."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    unknown = set(cfg) - set(defaults) - {"version"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    for k, v in cfg.items():
        if isinstance(out.get(k), dict) and isinstance(v, dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    out["version"] = CONFIG_VERSION
    if seed is not None:
        out["seed"] = int(seed)
        out["seeds"] = None
    return out


def cell_seeds(cfg: dict) -> list:
    """Explicit ``seeds`` if given, else ``n_seeds`` seeds derived from ``seed``."""
    if cfg.get("seeds"):
        return [int(s) for s in cfg["seeds"]]
    return [rngmod.derive_seed(cfg["seed"], rngmod.CELL, k) for k in range(int(cfg["n_seeds"]))]


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _train_cfg(cfg: dict, **overrides) -> TrainConfig:
    try:
        return replace(TrainConfig.from_dict(cfg.get("train", {})), **overrides)
    except TypeError as exc:
        raise ConfigError(f"bad train section: {exc}") from None


def _gen_cfg(cfg: dict) -> GenConfig:
    try:
        return GenConfig.from_dict(cfg.get("generator", {}))
    except TypeError as exc:
        raise ConfigError(f"bad generator section: {exc}") from None


def _batch(seed: int, gen: GenConfig) -> list:
    return generate_batch(rngmod.stream(seed, rngmod.WORKFLOWS), gen)


def _workflows(cfg: dict) -> list:
    """Workflows from the config's ``workflows`` file, else the seed's generated batch."""
    if cfg.get("workflows"):
        with open(cfg["workflows"]) as fh:
            return workflows_from_json(fh.read())
    return _batch(cell_seeds(cfg)[0], _gen_cfg(cfg))


def train_for(engine: Engine, workflows, steps: int) -> None:
    """Cycle through ``workflows`` one at a time until ``steps`` replay steps ran."""
    k = 0
    while engine.train_steps < steps:
        engine.train_on_workflows([workflows[k % len(workflows)]])
        k += 1


def mean_objective(engine: Engine, workflows) -> float:
    return float(np.mean([engine.decide(w)[1].objective for w in workflows]))


# -- loss-curve metrics --------------------------------------------------------

def steps_to_threshold(losses, threshold: float):
    """1-based step of the first loss at or below ``threshold``, else ``None``."""
    hit = np.nonzero(np.asarray(losses) <= threshold)[0]
    return int(hit[0]) + 1 if len(hit) else None


def rolling_std(losses, window: int = 50) -> float:
    """Mean standard deviation over all full sliding windows."""
    x = np.asarray(losses, dtype=float)
    if len(x) < window:
        raise ValueError("trace shorter than the window")
    w = np.lib.stride_tricks.sliding_window_view(x, window)
    return float(w.std(axis=1).mean())


def freeze_alignment(losses, interval: int = 200, tol: int = 5) -> float:
    """
    Fraction of the full ``interval``-step windows that follow a target sync
    whose largest single-step loss increase lies within ``tol`` steps of a
    sync.  Steps are 1-based and syncs happen after steps ``interval, 2*interval, ...``.
    """
    x = np.asarray(losses, dtype=float)
    jumps = np.diff(x)  # jumps[k] is the change into step k + 2
    steps = np.arange(2, len(x) + 1)
    hits = windows = 0
    for start in range(interval, len(x) - interval + 1, interval):
        mask = (steps > start) & (steps <= start + interval)
        k = steps[mask][np.argmax(jumps[mask])]
        windows += 1
        hits += min(abs(k - start), abs(k - start - interval)) <= tol
    if windows == 0:
        raise ValueError("trace too short for a full window after a sync")
    return hits / windows


# -- train / decide / oracle / meta-train -------------------------------------

TRAIN_DEFAULTS = {
    "env": "reference",
    "generator": {},
    "train": {},
    "steps": 1000,
    "seed": 0,
    "seeds": None,
    "n_seeds": 1,
}


def run_train(cfg: dict, meta_params: MetaParams = None) -> ExperimentResult:
    """Train one engine on the generated batch; emits trace and checkpoint."""
    env = _env(cfg["env"])
    seed = cell_seeds(cfg)[0]
    wfs = _batch(seed, _gen_cfg(cfg))
    engine = Engine(env, _train_cfg(cfg), seed, meta_params.psi if meta_params else None)
    train_for(engine, wfs, int(cfg["steps"]))
    res = ExperimentResult("train", cfg)
    res.tables["trace.csv"] = (engine.trace.HEADER, [
        (s, u, loss, eps, int(f)) for s, u, loss, eps, f in engine.trace.rows
    ])
    res.blobs["engine.json"] = json.dumps(engine.to_dict())
    res.summary = {"seed": seed, "train_steps": engine.train_steps,
                   "mean_objective": mean_objective(engine, wfs)}
    return res


DECIDE_DEFAULTS = {
    "checkpoint": None,
    "workflows": None,  # path to a workflows JSON file; generated batch otherwise
    "generator": {},
    "seed": 0,
    "seeds": None,
    "n_seeds": 1,
}


def run_decide(cfg: dict, workflows=None) -> ExperimentResult:
    if not cfg.get("checkpoint"):
        raise ConfigError("decide needs a 'checkpoint' path")
    engine = Engine.load(cfg["checkpoint"])
    if workflows is None:
        workflows = _workflows(cfg)
    rows = []
    for k, w in enumerate(workflows):
        plan, cost = engine.decide(w)
        rows.append((k, plan_str(plan), cost.total_delay_s, cost.energy_j, cost.objective))
    res = ExperimentResult("decide", cfg)
    res.tables["decisions.csv"] = (("workflow_id", "plan", "delay_s", "energy_j", "objective"), rows)
    res.summary = {"workflows": len(rows), "mean_objective": float(np.mean([r[-1] for r in rows]))}
    return res


ORACLE_DEFAULTS = {
    "env": "reference",
    "workflows": None,
    "generator": {},
    "solver": "dp",
    "seed": 0,
    "seeds": None,
    "n_seeds": 1,
}


def run_oracle(cfg: dict, workflows=None) -> ExperimentResult:
    solvers = {"dp": dp_optimal, "brute_force": brute_force_optimal}
    if cfg["solver"] not in solvers:
        raise ConfigError(f"solver must be one of {sorted(solvers)}")
    env = _env(cfg["env"])
    if workflows is None:
        workflows = _workflows(cfg)
    rows = []
    for k, w in enumerate(workflows):
        plan, obj = solvers[cfg["solver"]](w, env)
        rows.append((k, plan_str(plan), obj))
    res = ExperimentResult("oracle", cfg)
    res.tables["oracle.csv"] = (("workflow_id", "plan", "objective"), rows)
    res.summary = {"workflows": len(rows)}
    return res


META_TRAIN_DEFAULTS = {
    "train_ranges": "meta_train",
    "generator": {},
    "train": {},
    "meta_steps": 10_000,
    "seed": 0,
    "seeds": None,
    "n_seeds": 1,
}


def run_meta_train(cfg: dict) -> ExperimentResult:
    seed = cell_seeds(cfg)[0]
    last = {}
    psi = train_meta(_train_cfg(cfg), _ranges(cfg["train_ranges"]), _gen_cfg(cfg), seed,
                     steps=int(cfg["meta_steps"]), callback=lambda e: last.setdefault("engine", e))
    trace = last["engine"].trace
    res = ExperimentResult("meta-train", cfg)
    res.tables["meta_trace.csv"] = (trace.HEADER, [(s, u, loss, eps, int(f)) for s, u, loss, eps, f in trace.rows])
    res.blobs["meta_params.json"] = json.dumps(psi.psi.to_dict())
    res.summary = {"seed": seed, "layer_sizes": list(psi.psi.layer_sizes)}
    return res


# -- convergence sweep ---------------------------------------------------------

SWEEP_DEFAULTS = {
    "env": "reference",
    "generator": {},
    "train": {"n_units": 1},
    "learning_rates": [0.1, 0.01, 0.001, 0.0001],
    "batch_sizes": [128, 256, 512, 1024],
    "steps": 2000,
    "threshold_fraction": 0.05,
    "rolling_window": 50,
    "freeze_tolerance": 5,
    "seed": 0,
    "seeds": None,
    "n_seeds": 5,
}


def run_convergence_sweep(cfg: dict) -> ExperimentResult:
    """
    Loss traces for each learning rate (at the configured batch size) and each
    batch size (at the configured learning rate).  Each seed trains on its own
    generated batch.
    """
    env = _env(cfg["env"])
    gen = _gen_cfg(cfg)
    base = _train_cfg(cfg)
    steps = int(cfg["steps"])
    seeds = cell_seeds(cfg)
    cache = {}

    def trace(lr, bs, seed):
        key = (lr, bs, seed)
        if key not in cache:
            engine = Engine(env, replace(base, learning_rate=lr, batch_size=bs), seed)
            train_for(engine, _batch(seed, gen), steps)
            rows = [r for r in engine.trace.rows if r[1] == 0][:steps]
            cache[key] = (np.array([r[2] for r in rows]), [r[4] for r in rows])
        return cache[key]

    settings = [("learning_rate", float(v), float(v), base.batch_size) for v in cfg["learning_rates"]]
    settings += [("batch_size", int(v), base.learning_rate, int(v)) for v in cfg["batch_sizes"]]
    rows, summary = [], {}
    for axis, value, lr, bs in settings:
        curves, stds, aligns = [], [], []
        for seed in seeds:
            losses, freezes = trace(lr, bs, seed)
            curves.append(losses)
            stds.append(rolling_std(losses, cfg["rolling_window"]))
            if len(losses) >= 2 * base.freeze_interval:
                aligns.append(freeze_alignment(losses, base.freeze_interval, cfg["freeze_tolerance"]))
            rows.extend((axis, value, seed, k + 1, float(x), int(f))
                        for k, (x, f) in enumerate(zip(losses, freezes)))
        mean_curve = np.mean(curves, axis=0)
        threshold = cfg["threshold_fraction"] * mean_curve[0]
        summary[f"{axis}={value}"] = {
            "axis": axis,
            "value": value,
            "initial_loss": float(mean_curve[0]),
            "threshold": float(threshold),
            "steps_to_threshold": steps_to_threshold(mean_curve, threshold),
            "final_loss": float(mean_curve[-50:].mean()),
            "rolling_std": float(np.mean(stds)),
            "freeze_alignment": float(np.mean(aligns)) if aligns else None,
            "freeze_alignment_per_seed": [float(a) for a in aligns],
        }
    res = ExperimentResult("sweep-convergence", cfg, summary=summary)
    res.tables["convergence.csv"] = (("axis", "value", "seed", "step", "loss", "freeze_flag"), rows)
    return res


# -- scheme comparison ---------------------------------------------------------

COMPARE_DEFAULTS = {
    "env": "reference",
    "generator": {},
    "train": {},
    "deltas": [0.0, 0.25, 0.5, 1.0, 2.0],
    "steps": 1000,
    "dmro_units": 4,
    "seed": 0,
    "seeds": None,
    "n_seeds": 5,
}

SCHEMES = ("local", "edge", "cloud", "dqn", "dmro", "oracle")


def run_scheme_comparison(cfg: dict) -> ExperimentResult:
    """
    Mean objective over each seed's batch for the fixed-tier plans, the one-unit
    engine, the multi-unit engine and the exact optimum, at every delta.
    """
    gen = _gen_cfg(cfg)
    base = _train_cfg(cfg)
    rows = []
    for delta in cfg["deltas"]:
        env = _env(cfg["env"], float(delta))
        for seed in cell_seeds(cfg):
            wfs = _batch(seed, gen)
            objective = {}
            for name, tier in zip(("local", "edge", "cloud"), LOCATIONS):
                objective[name] = float(np.mean([workflow_cost(w, fixed_plan(w, tier), env).objective for w in wfs]))
            for name, units in (("dqn", 1), ("dmro", int(cfg["dmro_units"]))):
                engine = Engine(env, replace(base, n_units=units), seed)
                train_for(engine, wfs, int(cfg["steps"]))
                objective[name] = mean_objective(engine, wfs)
            objective["oracle"] = float(np.mean([dp_optimal(w, env)[1] for w in wfs]))
            rows.extend((name, float(delta), seed, objective[name]) for name in SCHEMES)
    summary = {}
    for delta in cfg["deltas"]:
        means = {s: float(np.mean([r[3] for r in rows if r[0] == s and r[1] == float(delta)])) for s in SCHEMES}
        medians = {s: float(np.median([r[3] for r in rows if r[0] == s and r[1] == float(delta)])) for s in SCHEMES}
        summary[f"delta={float(delta)}"] = {
            "mean": means,
            "median": medians,
            "best_fixed": min(means["local"], means["edge"], means["cloud"]),
            "dmro_oracle_gap": means["dmro"] / means["oracle"] - 1.0,
        }
    res = ExperimentResult("compare-schemes", cfg, summary=summary)
    res.tables["schemes.csv"] = (("scheme", "delta", "seed", "objective"), rows)
    return res


# -- meta study ----------------------------------------------------------------

META_STUDY_DEFAULTS = {
    "train_ranges": "meta_train",
    "test_env": "meta_test",
    "generator": {},
    "train": {},
    "meta_steps": 10_000,
    "steps": 2000,
    "eval_rounds": [0, 10, 20, 40, 60, 80, 120, 200],
    "threshold_fraction": 0.05,
    "seed": 0,
    "seeds": None,
    "n_seeds": 5,
}


def run_meta_study(cfg: dict, meta_params: MetaParams = None) -> ExperimentResult:
    """
    Paired runs in the test environment from meta-parameters and from random
    initialization.  A round is one replay step; decision cost is the mean
    objective over the seed's batch after that many steps.  The loss threshold
    is ``threshold_fraction`` times the median step-1 loss of the random arm.
    """
    test = _env(cfg["test_env"])
    gen = _gen_cfg(cfg)
    base = _train_cfg(cfg)
    if meta_params is None:
        meta_seed = rngmod.derive_seed(cfg["seed"], rngmod.CELL, 10_000)
        meta_params = train_meta(base, _ranges(cfg["train_ranges"]), gen, meta_seed,
                                 steps=int(cfg["meta_steps"]))
    rounds = sorted(int(r) for r in cfg["eval_rounds"])
    steps = max(int(cfg["steps"]), rounds[-1])
    loss_rows, cost_rows = [], []
    losses = {"meta": {}, "random": {}}
    for seed in cell_seeds(cfg):
        wfs = _batch(seed, gen)
        for arm in ("meta", "random"):
            engine = Engine(test, base, seed, meta_params.psi if arm == "meta" else None)
            k = 0
            for r in rounds:
                while engine.train_steps < r:
                    engine.train_on_workflows([wfs[k % len(wfs)]])
                    k += 1
                cost_rows.append((arm, seed, r, mean_objective(engine, wfs)))
            while engine.train_steps < steps:
                engine.train_on_workflows([wfs[k % len(wfs)]])
                k += 1
            trace = engine.trace.losses(0)[:steps]
            losses[arm][seed] = trace
            loss_rows.extend((arm, seed, j + 1, float(x)) for j, x in enumerate(trace))
    threshold = cfg["threshold_fraction"] * float(np.median([t[0] for t in losses["random"].values()]))
    summary = {"threshold": threshold, "budget": steps}
    for arm in ("meta", "random"):
        hits = [steps_to_threshold(t, threshold) for t in losses[arm].values()]
        censored = [h if h is not None else steps + 1 for h in hits]
        summary[arm] = {
            "steps_to_threshold": hits,
            "median_steps_to_threshold": float(np.median(censored)),
            "mean_initial_loss": float(np.mean([t[0] for t in losses[arm].values()])),
            "mean_cost": {str(r): float(np.mean([c[3] for c in cost_rows if c[0] == arm and c[2] == r]))
                          for r in rounds},
        }
    summary["steps_ratio"] = summary["meta"]["median_steps_to_threshold"] / summary["random"]["median_steps_to_threshold"]
    res = ExperimentResult("meta-study", cfg, summary=summary)
    res.tables["meta_loss.csv"] = (("arm", "seed", "step", "loss"), loss_rows)
    res.tables["meta_cost.csv"] = (("arm", "seed", "round", "objective"), cost_rows)
    res.blobs["meta_params.json"] = json.dumps(meta_params.psi.to_dict())
    return res


# -- output --------------------------------------------------------------------

def write_result(res: ExperimentResult, out_dir) -> dict:
    """Write CSVs, blobs, ``summary.json`` and ``manifest.json``; return the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []
    for name in sorted(res.tables):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(res.csv_text(name))
        artifacts.append(name)
    for name in sorted(res.blobs):
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(res.blobs[name])
        artifacts.append(name)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(res.summary, fh, indent=2, sort_keys=True)
    artifacts.append("summary.json")
    manifest = {
        "experiment": res.name,
        "config": res.config,
        "config_sha256": config_hash(res.config),
        "seeds": cell_seeds(res.config),
        "artifacts": artifacts,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
