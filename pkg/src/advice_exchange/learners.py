"""Stand-alone adaptation strategies over perceptron weights.

Random Walk, Simulated Annealing and the Evolutionary Algorithm all evaluate a
set of weights for one epoch and adapt at the epoch boundary. The heuristic
agent is a fixed policy kept for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mlp import BackpropParams, BackpropTrainer, NetworkWeights, forward, init_weights
from .sim import StateVector


@dataclass
class DecaySchedule:
    """Geometric decay ``value <- max(floor, factor * value)`` every ``interval`` epochs."""

    value: float
    factor: float = 0.99
    floor: float = 0.01
    interval: int = 5
    epochs_seen: int = 0

    def __post_init__(self):
        if not 0 < self.factor < 1:
            raise ValueError("decay factor must be in (0, 1)")
        if self.interval < 1:
            raise ValueError("decay interval must be at least one epoch")
        self.value = max(self.floor, self.value)

    def decay(self) -> float:
        self.value = max(self.floor, self.factor * self.value)
        return self.value

    def epoch_done(self) -> float:
        self.epochs_seen += 1
        if self.epochs_seen % self.interval == 0:
            self.decay()
        return self.value


def decay(s: DecaySchedule) -> DecaySchedule:
    out = DecaySchedule(s.value, s.factor, s.floor, s.interval, s.epochs_seen)
    out.decay()
    return out


def perturb(w: NetworkWeights, d: float, rng: np.random.Generator) -> NetworkWeights:
    flat = w.to_flat()
    return NetworkWeights.from_flat(flat + rng.uniform(-d, d, flat.shape), w.n_inputs, w.n_hidden)


def sa_accept_probability(delta_q: float, temperature: float) -> float:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if delta_q <= 0:
        return 1.0
    return math.exp(-delta_q / temperature)


def heu_green_time(s: StateVector) -> float:
    v = np.asarray(s.counts, dtype=float)
    if s.lifetimes is not None:
        v = (v + np.asarray(s.lifetimes, dtype=float)) / 2.0
    ns = max(v[0], v[1])
    ew = max(v[2], v[3])
    if ns + ew == 0:
        return 0.5
    return float(ns / (ns + ew))


class Agent:
    """Common surface used by the experiment loop and the advice protocol."""

    algorithm = "?"
    participates_in_advice = True

    def __init__(self):
        self.best_quality = -math.inf
        self.epochs_done = 0

    @property
    def has_best(self) -> bool:
        return self.epochs_done > 0

    def act(self, state: StateVector) -> float:
        raise NotImplementedError

    def cycle_done(self, state: StateVector, g: float, quality: float, next_state: StateVector):
        pass

    def end_epoch(self, quality: float):
        self.epochs_done += 1
        if quality > self.best_quality:
            self.best_quality = quality

    def best_response(self, state: StateVector) -> float:
        raise NotImplementedError

    def schedule_values(self) -> dict:
        return {}


class HeuristicAgent(Agent):
    algorithm = "HEU"
    participates_in_advice = False

    def act(self, state):
        return heu_green_time(state)

    best_response = act


class NetworkAgent(Agent):
    """Agent whose policy is a perceptron; absorbs advice by backpropagation."""

    def __init__(self, n_inputs: int, rng: np.random.Generator, backprop: BackpropParams | None = None):
        super().__init__()
        self.rng = rng
        self.n_inputs = n_inputs
        self.trainer = BackpropTrainer(backprop)
        self.best_weights: NetworkWeights | None = None

    def act(self, state):
        return forward(self.working, state)

    def best_response(self, state):
        if self.best_weights is None:
            raise RuntimeError(f"{self.algorithm} has no best-epoch snapshot to advise from")
        return forward(self.best_weights, state)

    def absorb(self, state: StateVector, target: float):
        self.working = self.trainer.step(self.working, state, target)


class RandomWalkAgent(NetworkAgent):
    algorithm = "RW"

    def __init__(self, n_inputs, rng, disturbance: DecaySchedule | None = None, backprop=None):
        super().__init__(n_inputs, rng, backprop)
        self.disturbance = disturbance or DecaySchedule(0.6)
        self.working = init_weights(n_inputs, rng)

    def end_epoch(self, quality):
        self.epochs_done += 1
        if quality > self.best_quality:
            self.best_quality = quality
            self.best_weights = self.working.copy()
        self.working = perturb(self.best_weights, self.disturbance.value, self.rng)
        self.trainer.reset()
        self.disturbance.epoch_done()

    def schedule_values(self):
        return {"d": self.disturbance.value}


def rw_epoch_end(agent: RandomWalkAgent, epoch_quality: float) -> RandomWalkAgent:
    agent.end_epoch(epoch_quality)
    return agent


class SimulatedAnnealingAgent(NetworkAgent):
    algorithm = "SA"

    def __init__(self, n_inputs, rng, disturbance: DecaySchedule | None = None,
                 temperature: DecaySchedule | None = None, backprop=None):
        super().__init__(n_inputs, rng, backprop)
        self.disturbance = disturbance or DecaySchedule(0.6)
        self.temperature = temperature or DecaySchedule(0.5, floor=0.001)
        self.working = init_weights(n_inputs, rng)
        self.current = self.working.copy()

    def end_epoch(self, quality):
        self.epochs_done += 1
        if quality > self.best_quality:
            self.best_quality = quality
            self.best_weights = self.working.copy()
            self.current = self.working.copy()
        else:
            p = sa_accept_probability(self.best_quality - quality, self.temperature.value)
            # rejection falls back to the best snapshot, as in Random Walk
            self.current = self.working.copy() if self.rng.random() < p else self.best_weights.copy()
        self.working = perturb(self.current, self.disturbance.value, self.rng)
        self.trainer.reset()
        self.disturbance.epoch_done()
        self.temperature.epoch_done()

    def schedule_values(self):
        return {"d": self.disturbance.value, "T": self.temperature.value}


@dataclass
class EAPartition:
    selected: int = 7
    elite: int = 3
    mutated: int = 15
    recombined: int = 2

    @property
    def size(self) -> int:
        return self.elite + self.mutated + self.recombined

    def __post_init__(self):
        if min(self.selected, self.elite, self.mutated, self.recombined) < 0:
            raise ValueError("population partition counts must be non-negative")
        if self.selected < 2 and self.recombined > 0:
            raise ValueError("recombination needs at least two selected specimens")
        if self.elite > self.selected:
            raise ValueError("elite count cannot exceed the selection count")
        if self.selected > self.size:
            raise ValueError("selection count exceeds population size")


def ea_next_generation(population: list[NetworkWeights], fitness, part: EAPartition,
                       disturbance: float, rng: np.random.Generator) -> list[NetworkWeights]:
    if len(population) != part.size or len(fitness) != part.size:
        raise ValueError(
            f"population of {len(population)} (fitness {len(fitness)}) does not match partition size {part.size}"
        )
    order = sorted(range(len(population)), key=lambda i: -fitness[i])
    selected = [population[i] for i in order[: part.selected]]
    nxt = [w.copy() for w in selected[: part.elite]]
    for _ in range(part.mutated):
        parent = selected[rng.integers(len(selected))]
        nxt.append(perturb(parent, disturbance, rng))
    for _ in range(part.recombined):
        i, j = rng.choice(len(selected), size=2, replace=False)
        a, b = selected[i], selected[j]
        hid = a if rng.random() < 0.5 else b
        out = a if rng.random() < 0.5 else b
        nxt.append(NetworkWeights(hid.hidden_w.copy(), hid.hidden_b.copy(), out.out_w.copy(), float(out.out_b)))
    return nxt


class EvolutionaryAgent(NetworkAgent):
    """Evaluates one specimen per epoch; breeds once the population is scored."""

    algorithm = "EA"

    def __init__(self, n_inputs, rng, partition: EAPartition | None = None,
                 disturbance: DecaySchedule | None = None, backprop=None):
        super().__init__(n_inputs, rng, backprop)
        self.partition = partition or EAPartition()
        self.disturbance = disturbance or DecaySchedule(0.6)
        self.population = [init_weights(n_inputs, rng) for _ in range(self.partition.size)]
        self.fitness = [0.0] * self.partition.size
        self.index = 0
        self.generation = 0

    @property
    def working(self):
        return self.population[self.index]

    @working.setter
    def working(self, w):
        self.population[self.index] = w

    def end_epoch(self, quality):
        self.epochs_done += 1
        self.fitness[self.index] = quality
        if quality > self.best_quality:
            self.best_quality = quality
            self.best_weights = self.working.copy()
        self.index += 1
        if self.index == len(self.population):
            self.population = ea_next_generation(
                self.population, self.fitness, self.partition, self.disturbance.value, self.rng
            )
            self.fitness = [0.0] * len(self.population)
            self.index = 0
            self.generation += 1
        self.trainer.reset()
        self.disturbance.epoch_done()

    def schedule_values(self):
        return {"d": self.disturbance.value, "generation": self.generation}
