"""Tabular Q-learning on a lattice discretization of the observation space."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from fractions import Fraction

import numpy as np

from .learners import Agent, DecaySchedule
from .sim import StateVector


class NoModelError(LookupError):
    """No transitions have been recorded for a (state, action) pair."""


def simplex_points(divisions: int, dim: int = 4) -> list[tuple[int, ...]]:
    """Integer compositions of ``divisions`` into ``dim`` parts, lexicographic."""
    out = []
    for head in itertools.product(range(divisions + 1), repeat=dim - 1):
        rest = divisions - sum(head)
        if rest >= 0:
            out.append(head + (rest,))
    return out


class StateLattice:
    """Enumerated lattice points plus nearest-neighbour lookup.

    Points are stored in enumeration order; ``discretize`` breaks distance ties
    in favour of the lowest index.
    """

    def __init__(self, points, representation: str):
        self.points = np.asarray(points, dtype=float)
        self.representation = representation
        self.index = {tuple(p): i for i, p in enumerate(map(tuple, self.points))}

    def __len__(self):
        return len(self.points)

    @classmethod
    def count(cls, divisions: int = 10) -> "StateLattice":
        pts = [tuple(c / divisions for c in p) for p in simplex_points(divisions)]
        return cls(pts, "count")

    @classmethod
    def count_time(cls, divisions: int = 4, life_levels=(0.0, 0.25, 0.5, 0.75, 1.0)) -> "StateLattice":
        counts = [tuple(c / divisions for c in p) for p in simplex_points(divisions)]
        lives = list(itertools.product(life_levels, repeat=4))
        return cls([c + l for c in counts for l in lives], "count_time")

    @classmethod
    def for_representation(cls, representation: str) -> "StateLattice":
        if representation == "count":
            return cls.count()
        if representation == "count_time":
            return cls.count_time()
        raise ValueError(f"unknown state representation {representation!r}")

    def discretize(self, s) -> int:
        x = s.as_array() if hasattr(s, "as_array") else np.asarray(s, dtype=float)
        if x.shape != (self.points.shape[1],):
            raise ValueError(f"state of shape {x.shape} does not match a {self.representation} lattice")
        d = ((self.points - x) ** 2).sum(axis=1)
        return int(np.argmin(d))


def discretize(s, lattice: StateLattice) -> int:
    return lattice.discretize(s)


def action_set(step: float = 0.05, g_max: float = 1.0) -> np.ndarray:
    n = int(round(g_max / step))
    return np.array([round(i * step, 10) for i in range(n + 1)])


def nearest_action(actions: np.ndarray, g: float) -> int:
    # argmin returns the first minimum, i.e. the lower g on ties
    return int(np.argmin(np.abs(actions - g)))


def boltzmann_probabilities(row: np.ndarray, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    z = (row - row.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


class QTable:
    def __init__(self, n_states: int, n_actions: int, alpha: DecaySchedule | None = None,
                 discount: float = 0.7, temperature: DecaySchedule | None = None):
        if not 0 <= discount < 1:
            raise ValueError("discount must be in [0, 1)")
        self.values = np.zeros((n_states, n_actions))
        self.alpha = alpha or DecaySchedule(0.6, floor=0.012)
        self.discount = discount
        self.temperature = temperature or DecaySchedule(0.5, floor=0.01)

    def qmax(self, s: int) -> float:
        return float(self.values[s].max())

    def dump(self, path):
        """Write non-zero entries as ``state action value`` lines."""
        with open(path, "w") as fh:
            for s, a in zip(*np.nonzero(self.values)):
                fh.write(f"{s} {a} {float(self.values[s, a])!r}\n")


def select_action(q: QTable, s: int, rng: np.random.Generator) -> int:
    p = boltzmann_probabilities(q.values[s], q.temperature.value)
    idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    return min(idx, len(p) - 1)


def update_q(q: QTable, s: int, a: int, r: float, s_next: int) -> QTable:
    target = r + q.discount * q.qmax(s_next)
    q.values[s, a] += q.alpha.value * (target - q.values[s, a])
    return q


class TransitionCounts:
    def __init__(self):
        self._counts: dict[tuple[int, int], dict[int, int]] = defaultdict(dict)

    def record(self, s: int, a: int, s_next: int):
        row = self._counts[(s, a)]
        row[s_next] = row.get(s_next, 0) + 1

    def count(self, s: int, a: int, s_next: int) -> int:
        return self._counts.get((s, a), {}).get(s_next, 0)

    def successors(self, s: int, a: int) -> dict[int, int]:
        return dict(self._counts.get((s, a), {}))

    def total(self, s: int, a: int) -> int:
        return sum(self._counts.get((s, a), {}).values())

    def probabilities(self, s: int, a: int, exact: bool = False) -> dict:
        row = self._counts.get((s, a))
        if not row:
            raise NoModelError(f"no transitions recorded from state {s} under action {a}")
        total = sum(row.values())
        if exact:
            return {k: Fraction(v, total) for k, v in row.items()}
        return {k: v / total for k, v in row.items()}


def record_transition(tc: TransitionCounts, s: int, a: int, s_next: int) -> TransitionCounts:
    tc.record(s, a, s_next)
    return tc


def expected_qmax(q: QTable, tc: TransitionCounts, s: int, a: int) -> float:
    return sum(p * q.qmax(k) for k, p in tc.probabilities(s, a).items())


class QLearningAgent(Agent):
    algorithm = "QL"

    def __init__(self, representation: str, rng: np.random.Generator, *, lattice: StateLattice | None = None,
                 actions: np.ndarray | None = None, alpha: DecaySchedule | None = None,
                 discount: float = 0.7, temperature: DecaySchedule | None = None):
        super().__init__()
        self.representation = representation
        self.rng = rng
        self.lattice = lattice or StateLattice.for_representation(representation)
        self.actions = action_set() if actions is None else np.asarray(actions, dtype=float)
        self.table = QTable(len(self.lattice), len(self.actions), alpha, discount, temperature)
        self.transitions = TransitionCounts()
        self._pending: tuple[int, int] | None = None

    def act(self, state):
        s = self.lattice.discretize(state)
        a = select_action(self.table, s, self.rng)
        self._pending = (s, a)
        return float(self.actions[a])

    def cycle_done(self, state, g, quality, next_state):
        s, a = self._pending
        s_next = self.lattice.discretize(next_state)
        update_q(self.table, s, a, quality, s_next)
        self.transitions.record(s, a, s_next)
        self._pending = None

    def end_epoch(self, quality):
        super().end_epoch(quality)
        self.table.alpha.epoch_done()
        self.table.temperature.epoch_done()

    def greedy_action(self, state) -> int:
        return int(np.argmax(self.table.values[self.lattice.discretize(state)]))

    def best_response(self, state):
        return float(self.actions[self.greedy_action(state)])

    def absorb(self, state, target: float, reward: float):
        """Reward the action nearest to ``target`` using the learned transition model."""
        s = self.lattice.discretize(state)
        a = nearest_action(self.actions, target)
        try:
            future = expected_qmax(self.table, self.transitions, s, a)
        except NoModelError:
            future = 0.0
        q = self.table
        q.values[s, a] += q.alpha.value * (reward + q.discount * future - q.values[s, a])

    def schedule_values(self):
        return {"alpha": self.table.alpha.value, "T": self.table.temperature.value}


def q_bound(discount: float) -> float:
    return 1.0 / (1.0 - discount) if discount < 1 else math.inf
