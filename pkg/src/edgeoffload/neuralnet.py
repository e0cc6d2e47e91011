"""
Small fully connected Q-network: input -> ReLU -> ReLU -> linear(3).

Gradients are derived by hand for this fixed architecture.  Parameters live in
an ``MlpParams`` value that can be deep-copied into a frozen target network
and written to / read from a JSON checkpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1
TARGET_CLIP = (-1e9, 0.0)


@dataclass
class MlpParams:
    layer_sizes: tuple
    weights: list = field(repr=False)  # weights[k] has shape (fan_out, fan_in)
    biases: list = field(repr=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("need one weight matrix and bias vector per layer transition")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != shape or b.shape != (shape[0],):
                raise ValueError(f"layer {k}: expected {shape}, got {w.shape} / {b.shape}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def equals(self, other: "MlpParams") -> bool:
        """Bitwise equality of shapes and values."""
        return self.layer_sizes == other.layer_sizes and all(
            np.array_equal(a, b)
            for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def to_dict(self) -> dict:
        # float.hex keeps checkpoints bit-exact
        return {
            "version": CHECKPOINT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "weights": [[float(x).hex() for x in w.ravel()] for w in self.weights],
            "biases": [[float(x).hex() for x in b] for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpParams":
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
        sizes = tuple(data["layer_sizes"])
        weights = [
            np.array([float.fromhex(x) for x in w]).reshape(sizes[k + 1], sizes[k])
            for k, w in enumerate(data["weights"])
        ]
        biases = [np.array([float.fromhex(x) for x in b]) for b in data["biases"]]
        return cls(sizes, weights, biases)


def save_params(p: MlpParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(p.to_dict(), fh)


def load_params(path) -> MlpParams:
    with open(path) as fh:
        return MlpParams.from_dict(json.load(fh))


def init_mlp(layer_sizes, rng: np.random.Generator) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or any(n < 1 for n in sizes):
        raise ValueError(f"invalid layer sizes {layer_sizes!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(sizes, weights, biases)


def _forward_cache(p: MlpParams, x: np.ndarray):
    # x: (batch, input_dim)
    acts = [x]
    pre = []
    h = x
    last = len(p.weights) - 1
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return pre, acts


def forward(p: MlpParams, state) -> np.ndarray:
    """Q-values for one state (1-D input) or a batch of states (2-D input)."""
    x = np.asarray(state, dtype=float)
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"state has dimension {x.shape[-1]}, network expects {p.input_dim}")
    if x.ndim == 1:
        return _forward_cache(p, x[None, :])[1][-1][0]
    return _forward_cache(p, x)[1][-1]


def _check_batch(p, states, actions, targets):
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=np.intp)
    targets = np.asarray(targets, dtype=float)
    if states.ndim != 2 or len(states) == 0:
        raise ValueError("batch must be a non-empty 2-D array of states")
    if states.shape[1] != p.input_dim:
        raise ValueError(f"state has dimension {states.shape[1]}, network expects {p.input_dim}")
    if not np.all(np.isfinite(targets)):
        raise ValueError("non-finite target in batch")
    return states, actions, np.clip(targets, *TARGET_CLIP)


def batch_loss(p: MlpParams, states, actions, targets) -> float:
    """Mean squared error between Q(state)[action] and target."""
    states, actions, targets = _check_batch(p, states, actions, targets)
    q = forward(p, states)
    err = q[np.arange(len(actions)), actions] - targets
    return float(np.mean(err * err))


def loss_and_grads(p: MlpParams, states, actions, targets):
    """Loss and gradients (same layout as ``p.weights`` / ``p.biases``)."""
    states, actions, targets = _check_batch(p, states, actions, targets)
    n = len(states)
    pre, acts = _forward_cache(p, states)
    rows = np.arange(n)
    err = acts[-1][rows, actions] - targets
    loss = float(np.mean(err * err))

    # only the chosen output carries gradient
    delta = np.zeros_like(acts[-1])
    delta[rows, actions] = 2.0 * err / n
    gw = [None] * len(p.weights)
    gb = [None] * len(p.weights)
    for k in range(len(p.weights) - 1, -1, -1):
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ p.weights[k]) * (pre[k - 1] > 0)
    return loss, gw, gb


def train_step(p: MlpParams, states, actions, targets, learning_rate: float) -> float:
    """One in-place SGD step on the batch MSE.  Returns the loss before the step."""
    loss, gw, gb = loss_and_grads(p, states, actions, targets)
    for w, b, dw, db in zip(p.weights, p.biases, gw, gb):
        w -= learning_rate * dw
        b -= learning_rate * db
    return loss


def copy_into_target(src: MlpParams, dst: MlpParams) -> None:
    """Overwrite ``dst`` with a snapshot of ``src``."""
    if src.layer_sizes != dst.layer_sizes:
        raise ValueError(f"shape mismatch: {src.layer_sizes} vs {dst.layer_sizes}")
    for a, b in zip(src.weights + src.biases, dst.weights + dst.biases):
        np.copyto(b, a)
