"""One-hidden-layer perceptron mapping a state vector to a green-time fraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIDDEN = 4


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def bipolar(x):
    return 2.0 * sigmoid(x) - 1.0


@dataclass
class NetworkWeights:
    hidden_w: np.ndarray  # (hidden, inputs)
    hidden_b: np.ndarray  # (hidden,)
    out_w: np.ndarray  # (hidden,)
    out_b: float

    @property
    def n_inputs(self) -> int:
        return self.hidden_w.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.hidden_w.shape[0]

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(self.hidden_w.copy(), self.hidden_b.copy(), self.out_w.copy(), float(self.out_b))

    def to_flat(self) -> np.ndarray:
        """Hidden weights row-major, hidden biases, output weights, output bias."""
        return np.concatenate([self.hidden_w.ravel(), self.hidden_b, self.out_w, [self.out_b]])

    @classmethod
    def from_flat(cls, flat, n_inputs: int, n_hidden: int = HIDDEN) -> "NetworkWeights":
        flat = np.asarray(flat, dtype=float)
        expected = n_hidden * n_inputs + 2 * n_hidden + 1
        if flat.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {flat.shape}")
        i = n_hidden * n_inputs
        return cls(
            flat[:i].reshape(n_hidden, n_inputs).copy(),
            flat[i : i + n_hidden].copy(),
            flat[i + n_hidden : i + 2 * n_hidden].copy(),
            float(flat[-1]),
        )

    def layers(self):
        return (self.hidden_w, self.hidden_b), (self.out_w, self.out_b)

    def equals(self, other: "NetworkWeights") -> bool:
        return np.array_equal(self.to_flat(), other.to_flat())


def init_weights(n_inputs: int, rng: np.random.Generator, n_hidden: int = HIDDEN) -> NetworkWeights:
    if n_inputs not in (4, 8):
        raise ValueError(f"input size must be 4 or 8, got {n_inputs}")
    n = n_hidden * n_inputs + 2 * n_hidden + 1
    return NetworkWeights.from_flat(rng.uniform(-0.5, 0.5, n), n_inputs, n_hidden)


def zero_weights(n_inputs: int, n_hidden: int = HIDDEN) -> NetworkWeights:
    return NetworkWeights.from_flat(np.zeros(n_hidden * n_inputs + 2 * n_hidden + 1), n_inputs, n_hidden)


def _as_input(w: NetworkWeights, s) -> np.ndarray:
    x = s.as_array() if hasattr(s, "as_array") else np.asarray(s, dtype=float)
    if x.shape != (w.n_inputs,):
        raise ValueError(f"network expects {w.n_inputs} inputs, got shape {x.shape}")
    return x


def hidden_activations(w: NetworkWeights, s) -> np.ndarray:
    return bipolar(w.hidden_w @ _as_input(w, s) + w.hidden_b)


def forward(w: NetworkWeights, s) -> float:
    h = hidden_activations(w, s)
    return float(sigmoid(w.out_w @ h + w.out_b))


def gradient(w: NetworkWeights, s, target: float) -> NetworkWeights:
    """Gradient of 0.5 * (forward(s) - target)**2, packed like the weights."""
    x = _as_input(w, s)
    h = bipolar(w.hidden_w @ x + w.hidden_b)
    y = float(sigmoid(w.out_w @ h + w.out_b))
    delta_out = (y - target) * y * (1.0 - y)
    # d bipolar / dz = (1 - h^2) / 2
    delta_h = delta_out * w.out_w * 0.5 * (1.0 - h * h)
    return NetworkWeights(np.outer(delta_h, x), delta_h, delta_out * h, delta_out)


@dataclass
class BackpropParams:
    learning_rate: float = 0.01
    momentum: float = 0.5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


class BackpropTrainer:
    """Single-sample backpropagation with momentum; keeps the previous update."""

    def __init__(self, params: BackpropParams | None = None):
        self.params = params or BackpropParams()
        self.velocity: np.ndarray | None = None

    def reset(self):
        self.velocity = None

    def step(self, w: NetworkWeights, s, target: float) -> NetworkWeights:
        if not 0.0 <= target <= 1.0:
            raise ValueError(f"target must be in [0, 1], got {target}")
        grad = gradient(w, s, target).to_flat()
        update = -self.params.learning_rate * grad
        if self.velocity is not None and self.velocity.shape == update.shape:
            update = update + self.params.momentum * self.velocity
        self.velocity = update
        new = NetworkWeights.from_flat(w.to_flat() + update, w.n_inputs, w.n_hidden)
        if not np.all(np.isfinite(new.to_flat())):
            raise FloatingPointError("backprop produced non-finite weights")
        return new


def backprop_step(w: NetworkWeights, s, target: float, p: BackpropParams,
                  trainer: BackpropTrainer | None = None) -> NetworkWeights:
    trainer = trainer or BackpropTrainer(p)
    return trainer.step(w, s, target)
