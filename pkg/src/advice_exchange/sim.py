"""Turn-based simulator for a single, disconnected four-lane intersection.

Each lane is a straight line of cells: an incoming segment (where cars are
inserted and queue at the stop line), a crossing cell and an outgoing segment.
Cars move one cell per turn, never overtake, never enter the crossing on
yellow or red, and leave the system at the end of the outgoing segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

LANES = ("N", "S", "E", "W")
PHASES = ("greenNS", "yellow1", "greenEW", "yellow2")

# lane index -> phases in which that lane may cross
_GREEN_LANES = {
    "greenNS": np.array([True, True, False, False]),
    "yellow1": np.zeros(4, dtype=bool),
    "greenEW": np.array([False, False, True, True]),
    "yellow2": np.zeros(4, dtype=bool),
}

EMPTY = -1


@dataclass(frozen=True)
class CarGenParams:
    """Saw-tooth insertion probability parameters for one lane."""

    initial_delay: int = 100
    period: int = 500
    min_prob: float = 0.01
    max_prob: float = 0.3

    def __post_init__(self):
        if not 0 < self.initial_delay <= self.period:
            raise ValueError(f"initial_delay must be in (0, period], got {self.initial_delay}")
        if not 50 <= self.period <= 5000:
            raise ValueError(f"period must be in [50, 5000], got {self.period}")
        if not 0 <= self.min_prob < self.max_prob <= 1:
            raise ValueError(
                f"need 0 <= min_prob < max_prob <= 1, got {self.min_prob}, {self.max_prob}"
            )


@dataclass(frozen=True)
class QualityParams:
    lifemax: float = 300.0
    steepness: float = 10.0
    midpoint: float = 0.5

    def __post_init__(self):
        if self.lifemax <= 0:
            raise ValueError("lifemax must be positive")
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        if not 0 < self.midpoint < 1:
            raise ValueError("midpoint must lie in (0, 1)")


@dataclass(frozen=True)
class SignalPlan:
    """Green split for one cycle. ``g`` is the N/S share of non-yellow time."""

    g: float
    yellow: int = 10
    cycle_length: int = 100

    def __post_init__(self):
        if not 0.0 <= self.g <= 1.0:
            raise ValueError(f"g must be in [0, 1], got {self.g}")
        if 2 * self.yellow >= self.cycle_length:
            raise ValueError("2 * yellow must be shorter than the cycle")

    def phase_durations(self) -> tuple[int, int, int, int]:
        green_total = self.cycle_length - 2 * self.yellow
        ns = int(math.floor(self.g * green_total + 0.5))
        return ns, self.yellow, green_total - ns, self.yellow

    def phase_sequence(self) -> list[str]:
        """Phase of every turn in the cycle, in order."""
        seq = []
        for phase, n in zip(PHASES, self.phase_durations()):
            seq.extend([phase] * n)
        return seq


@dataclass
class StateVector:
    counts: np.ndarray
    lifetimes: np.ndarray | None = None

    @property
    def representation(self) -> str:
        return "count" if self.lifetimes is None else "count_time"

    def as_array(self) -> np.ndarray:
        if self.lifetimes is None:
            return self.counts.copy()
        return np.concatenate([self.counts, self.lifetimes])


def car_insert_probability(t: int, p: CarGenParams) -> float:
    return (p.max_prob - p.min_prob) * ((t + p.initial_delay) % p.period) / p.period + p.min_prob


def shaped_quality(raw: float, q: QualityParams) -> float:
    # exp overflow guard: raw is bounded above by 1 but unbounded below
    x = -q.steepness * (raw - q.midpoint)
    if x > 700:
        return 1.0 / (1.0 + math.exp(700))
    return 1.0 / (1.0 + math.exp(x))


@dataclass
class World:
    """Mutable state of one intersection.

    ``birth`` holds, per lane and cell, the birth turn of the occupying car or
    ``EMPTY``. Cells ``[0, incoming)`` are the incoming segment; the stop line
    is cell ``incoming - 1``.
    """

    car_gen: tuple[CarGenParams, ...]
    rng: np.random.Generator
    incoming: int = 60
    crossing: int = 1
    outgoing: int = 10
    turn: int = 0
    phase: str = "greenNS"
    inserted: int = 0
    removed: int = 0
    birth: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.car_gen) != 4:
            raise ValueError("need one CarGenParams per lane (N, S, E, W)")
        if self.incoming < 1 or self.crossing < 1 or self.outgoing < 1:
            raise ValueError("lane segments must have at least one cell")
        if self.birth is None:
            self.birth = np.full((4, self.length), EMPTY, dtype=np.int64)
        self._min = np.array([p.min_prob for p in self.car_gen])
        self._span = np.array([p.max_prob - p.min_prob for p in self.car_gen])
        self._delay = np.array([p.initial_delay for p in self.car_gen], dtype=np.int64)
        self._period = np.array([p.period for p in self.car_gen], dtype=np.int64)

    @classmethod
    def create(cls, car_gen, seed, **geometry) -> "World":
        if isinstance(car_gen, CarGenParams):
            car_gen = (car_gen,) * 4
        return cls(car_gen=tuple(car_gen), rng=np.random.default_rng(seed), **geometry)

    @property
    def length(self) -> int:
        return self.incoming + self.crossing + self.outgoing

    @property
    def stop_line(self) -> int:
        return self.incoming - 1

    def occupied(self) -> np.ndarray:
        return self.birth != EMPTY

    def in_system(self) -> int:
        return int(np.count_nonzero(self.birth != EMPTY))

    def incoming_counts(self) -> np.ndarray:
        return np.count_nonzero(self.birth[:, : self.incoming] != EMPTY, axis=1)

    def insert_probabilities(self, t: int) -> np.ndarray:
        return self._span * ((t + self._delay) % self._period) / self._period + self._min

    def place_car(self, lane: int, position: int, birth_turn: int | None = None):
        """Put a car directly on a cell. Test and scenario helper."""
        if self.birth[lane, position] != EMPTY:
            raise ValueError(f"cell {position} of lane {LANES[lane]} is occupied")
        self.birth[lane, position] = self.turn if birth_turn is None else birth_turn
        self.inserted += 1

    def step_turn(self, uniforms: np.ndarray | None = None) -> None:
        """Advance one turn under the current phase.

        ``uniforms`` are the four insertion draws (N, S, E, W); when omitted
        they are taken from the world's own stream.
        """
        if uniforms is None:
            uniforms = self.rng.random(4)
        birth = self.birth
        occ = birth != EMPTY
        stop = self.stop_line

        # the only blocking source is a stop line facing yellow/red: the
        # contiguous queue ending there stays put, every other car advances
        red = ~_GREEN_LANES[self.phase]
        stuck = np.zeros_like(occ)
        if red.any():
            queue = np.cumprod(occ[:, stop::-1], axis=1).astype(bool)[:, ::-1]
            stuck[:, : stop + 1] = queue & red[:, None]
        movers = occ & ~stuck

        self.removed += int(np.count_nonzero(movers[:, -1]))
        new = np.where(stuck, birth, EMPTY)
        new[:, 1:] = np.where(movers[:, :-1], birth[:, :-1], new[:, 1:])

        p = self.insert_probabilities(self.turn)
        self.turn += 1
        insert = (uniforms < p) & (new[:, 0] == EMPTY)
        new[insert, 0] = self.turn
        self.inserted += int(np.count_nonzero(insert))
        self.birth = new

    def first_car_lifetimes(self) -> np.ndarray:
        """Lifetime of the incoming car closest to the stop line; 0 for empty lanes."""
        inc = self.birth[:, : self.incoming]
        out = np.zeros(4)
        for lane in range(4):
            cells = np.flatnonzero(inc[lane] != EMPTY)
            if cells.size:
                out[lane] = self.turn - inc[lane, cells[-1]]
        return out

    def incoming_lifetimes(self) -> np.ndarray:
        inc = self.birth[:, : self.incoming]
        return self.turn - inc[inc != EMPTY]


def extract_count_state(w: World) -> StateVector:
    n = w.incoming_counts().astype(float)
    total = n.sum()
    if total == 0:
        return StateVector(np.full(4, 0.25))
    return StateVector(n / total)


def extract_count_time_state(w: World, q: QualityParams) -> StateVector:
    counts = extract_count_state(w).counts
    life = np.minimum(w.first_car_lifetimes(), q.lifemax) / q.lifemax
    return StateVector(counts, life)


def raw_quality(w: World, q: QualityParams) -> float:
    inc = w.birth[:, : w.incoming]
    mask = inc != EMPTY
    n = int(np.count_nonzero(mask))
    if n == 0:
        return 1.0
    life_sum = n * w.turn - int(inc[mask].sum())
    return 1.0 - life_sum / n / q.lifemax


def observe(w: World, representation: str, q: QualityParams) -> StateVector:
    if representation == "count":
        return extract_count_state(w)
    if representation == "count_time":
        return extract_count_time_state(w, q)
    raise ValueError(f"unknown state representation {representation!r}")


@numba.njit(cache=True)
def _cycle_kernel(birth, uniforms, green, turn, span, pmin, delay, period,
                  incoming, lifemax, steepness, midpoint):
    """Compiled equivalent of ``World.step_turn`` + shaped quality, per turn.

    ``green[t, lane]`` says whether ``lane`` may cross on turn ``t``.
    Returns (quality sum, cars inserted, cars removed, final turn).
    """
    n_turns = uniforms.shape[0]
    length = birth.shape[1]
    stop = incoming - 1
    total = 0.0
    inserted = 0
    removed = 0
    for i in range(n_turns):
        for lane in range(4):
            row = birth[lane]
            # the queue ending at a red stop line holds; everything else moves
            hold = -1
            if not green[i, lane]:
                j = stop
                while j >= 0 and row[j] != -1:
                    j -= 1
                hold = j + 1
            if row[length - 1] != -1:
                removed += 1
            # descending in place, so row[j - 1] is still last turn's value
            for j in range(length - 1, 0, -1):
                if hold <= j <= stop and hold != -1:
                    continue
                if hold <= j - 1 <= stop and hold != -1:
                    row[j] = -1
                else:
                    row[j] = row[j - 1]
            if hold != 0:
                row[0] = -1
            p = span[lane] * ((turn + delay[lane]) % period[lane]) / period[lane] + pmin[lane]
            if uniforms[i, lane] < p and row[0] == -1:
                row[0] = turn + 1
                inserted += 1
        turn += 1
        n = 0
        bsum = 0
        for lane in range(4):
            for j in range(incoming):
                b = birth[lane, j]
                if b != -1:
                    n += 1
                    bsum += b
        if n == 0:
            raw = 1.0
        else:
            raw = 1.0 - (n * turn - bsum) / n / lifemax
        x = -steepness * (raw - midpoint)
        if x > 700.0:
            x = 700.0
        total += 1.0 / (1.0 + np.exp(x))
    return total, inserted, removed, turn


def run_cycle(w: World, plan: SignalPlan, q: QualityParams) -> float:
    """Run one green-yellow-red cycle and return its mean shaped quality."""
    # same stream order as per-turn draws: row-major (turn, lane)
    uniforms = w.rng.random((plan.cycle_length, 4))
    phases = plan.phase_sequence()
    green = np.stack([_GREEN_LANES[ph] for ph in phases])
    total, ins, rem, turn = _cycle_kernel(
        w.birth, uniforms, green, w.turn, w._span, w._min, w._delay, w._period,
        w.incoming, float(q.lifemax), float(q.steepness), float(q.midpoint),
    )
    w.inserted += ins
    w.removed += rem
    w.turn = turn
    w.phase = phases[-1]
    return total / plan.cycle_length


def run_cycle_stepwise(w: World, plan: SignalPlan, q: QualityParams) -> float:
    """Reference path for ``run_cycle`` built on ``World.step_turn``."""
    uniforms = w.rng.random((plan.cycle_length, 4))
    total = 0.0
    for i, phase in enumerate(plan.phase_sequence()):
        w.phase = phase
        w.step_turn(uniforms[i])
        total += shaped_quality(raw_quality(w, q), q)
    return total / plan.cycle_length


@dataclass
class EpochRecord:
    average_quality: float
    cycle_qualities: list[float]
    green_times: list[float]


def run_epoch(w: World, policy, q: QualityParams, *, cycles: int = 50, yellow: int = 10,
              cycle_length: int = 100, representation: str = "count") -> EpochRecord:
    """Drive ``w`` for one epoch with a plain state -> g callable."""
    quals, greens = [], []
    for _ in range(cycles):
        g = float(policy(observe(w, representation, q)))
        quals.append(run_cycle(w, SignalPlan(g, yellow, cycle_length), q))
        greens.append(g)
    return EpochRecord(float(np.mean(quals)), quals, greens)
