"""Experiment loop: one intersection per agent, round-robin per cycle.

Every agent draws from its own simulator and learner streams, split from the
master seed by (agent index, purpose). The advice path consumes no random
numbers, so switching advice off leaves each agent's trajectory identical to
a stand-alone run with the same seed.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .advice import broadcast_scores, exchange
from .config import ExperimentConfig
from .learners import (DecaySchedule, EAPartition, EvolutionaryAgent, HeuristicAgent,
                       RandomWalkAgent, SimulatedAnnealingAgent)
from .mlp import BackpropParams
from .qlearning import QLearningAgent, action_set
from .sim import World, observe, run_cycle

log = logging.getLogger(__name__)

SIM_STREAM = 0
LEARNER_STREAM = 1

CSV_COLUMNS = ("epoch", "agent_id", "algorithm", "avg_quality", "best_quality",
               "advice_requested", "advice_given", "schedule")


def derive_rng(master_seed: int, agent_index: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(agent_index, purpose)))


def build_agent(name: str, cfg: ExperimentConfig, rng: np.random.Generator):
    ln = cfg.learners
    n_inputs = 4 if cfg.representation == "count" else 8
    bp = BackpropParams(**ln["backprop"])
    if name == "RW":
        return RandomWalkAgent(n_inputs, rng, DecaySchedule(**ln["RW"]["disturbance"]), bp)
    if name == "SA":
        return SimulatedAnnealingAgent(n_inputs, rng, DecaySchedule(**ln["SA"]["disturbance"]),
                                       DecaySchedule(**ln["SA"]["temperature"]), bp)
    if name == "EA":
        return EvolutionaryAgent(n_inputs, rng, EAPartition(**ln["EA"]["partition"]),
                                 DecaySchedule(**ln["EA"]["disturbance"]), bp)
    if name == "QL":
        q = ln["QL"]
        return QLearningAgent(cfg.representation, rng, actions=action_set(q["action_step"], q["g_max"]),
                              alpha=DecaySchedule(**q["alpha"]), discount=q["discount"],
                              temperature=DecaySchedule(**q["temperature"]))
    if name == "HEU":
        return HeuristicAgent()
    raise ValueError(f"unknown algorithm {name!r}")


def build_world(cfg: ExperimentConfig, agent_index: int) -> World:
    sc = cfg.scenario
    return World(car_gen=sc.lanes, rng=derive_rng(cfg.seed, agent_index, SIM_STREAM),
                 incoming=sc.incoming, crossing=sc.crossing, outgoing=sc.outgoing)


@dataclass
class EpochRow:
    epoch: int
    agent_id: int
    algorithm: str
    avg_quality: float
    best_quality: float
    advice_requested: int
    advice_given: int
    schedule: dict = field(default_factory=dict)

    def csv_values(self) -> list:
        return [self.epoch, self.agent_id, self.algorithm, repr(self.avg_quality), repr(self.best_quality),
                self.advice_requested, self.advice_given, json.dumps(self.schedule, sort_keys=True)]

    @classmethod
    def from_csv(cls, rec: dict) -> "EpochRow":
        return cls(int(rec["epoch"]), int(rec["agent_id"]), rec["algorithm"], float(rec["avg_quality"]),
                   float(rec["best_quality"]), int(rec["advice_requested"]), int(rec["advice_given"]),
                   json.loads(rec["schedule"]))


@dataclass
class RunTrace:
    rows: list[EpochRow] = field(default_factory=list)
    events: list = field(default_factory=list)

    def for_agent(self, agent_id: int) -> list[EpochRow]:
        return [r for r in self.rows if r.agent_id == agent_id]

    def final_best(self) -> dict[int, float]:
        out = {}
        for r in self.rows:
            out[r.agent_id] = r.best_quality
        return out


class OutputWriter:
    """Append-only CSV trace plus JSONL advice log, flushed every epoch."""

    def __init__(self, out_dir, cfg: ExperimentConfig):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.csv_path = self.dir / "trace.csv"
        self.events_path = self.dir / "advice_events.jsonl"
        cfg.dump(self.dir / "config.json")
        fresh = not self.csv_path.exists() or self.csv_path.stat().st_size == 0
        try:
            self._csv = open(self.csv_path, "a", newline="")
            self._events = open(self.events_path, "a")
        except OSError as exc:
            raise OSError(f"cannot open outputs in {self.dir}: {exc}") from exc
        self._writer = csv.writer(self._csv, lineterminator="\n")
        if fresh:
            # location-independent, so identical runs give identical bytes anywhere
            self._csv.write(f"# config: {cfg.dumps(with_output_dir=False)}\n")
            self._writer.writerow(CSV_COLUMNS)
            self._csv.flush()

    def write_epoch(self, rows, events):
        for r in rows:
            self._writer.writerow(r.csv_values())
        for e in events:
            self._events.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")
        self._csv.flush()
        self._events.flush()

    def close(self):
        self._csv.close()
        self._events.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_outputs(trace: RunTrace, cfg: ExperimentConfig, out_dir=None) -> Path:
    out_dir = Path(out_dir or cfg.output_dir)
    with OutputWriter(out_dir, cfg) as w:
        epochs = sorted({r.epoch for r in trace.rows})
        for ep in epochs:
            w.write_epoch([r for r in trace.rows if r.epoch == ep], [e for e in trace.events if e.epoch == ep])
    return out_dir


def read_trace(csv_path) -> RunTrace:
    text = Path(csv_path).read_text()
    body = "".join(line for line in io.StringIO(text) if not line.startswith("#"))
    return RunTrace([EpochRow.from_csv(rec) for rec in csv.DictReader(io.StringIO(body))])


def run_experiment(cfg: ExperimentConfig, out_dir=None, agent_ids=None, on_cycle=None) -> RunTrace:
    """Run the configured roster; ``agent_ids`` restricts to a subset (stand-alone runs).

    When ``out_dir`` is given, rows and advice events are appended as each
    epoch completes. ``on_cycle(epoch, cycle, agent_id, agent)`` is called
    after every agent cycle.
    """
    sc = cfg.scenario
    qp = sc.quality
    ids = list(range(len(cfg.agents))) if agent_ids is None else list(agent_ids)
    agents = {i: build_agent(cfg.agents[i], cfg, derive_rng(cfg.seed, i, LEARNER_STREAM)) for i in ids}
    worlds = {i: build_world(cfg, i) for i in ids}
    roster = [agents[i] for i in ids]
    advice_on = cfg.advice and len(ids) > 1
    ap = cfg.advice_params

    writer = OutputWriter(out_dir, cfg) if out_dir is not None else None
    trace = RunTrace()
    try:
        states = {i: observe(worlds[i], cfg.representation, qp) for i in ids}
        for epoch in range(cfg.epochs):
            board = None
            if advice_on:
                board = broadcast_scores(roster, epoch, ap["ban_horizon"], ap["discount"], ap["ql_reward"])
            totals = dict.fromkeys(ids, 0.0)
            requested = dict.fromkeys(ids, 0)
            given = dict.fromkeys(ids, 0)
            events = []
            for cycle in range(sc.cycles_per_epoch):
                for pos, i in enumerate(ids):
                    agent = agents[i]
                    s = states[i]
                    if advice_on and agent.participates_in_advice:
                        cq = totals[i] / cycle if cycle else None
                        ev = exchange(roster, pos, board, cq, s, epoch, cycle)
                        if ev is not None:
                            ev.advisee, ev.advisor = i, ids[ev.advisor]
                            requested[i] += 1
                            given[ev.advisor] += 1
                            events.append(ev)
                    g = agent.act(s)
                    q = run_cycle(worlds[i], sc.plan(g), qp)
                    nxt = observe(worlds[i], cfg.representation, qp)
                    agent.cycle_done(s, g, q, nxt)
                    states[i] = nxt
                    totals[i] += q
                    if on_cycle is not None:
                        on_cycle(epoch, cycle, i, agent)
            rows = []
            for i in ids:
                agent = agents[i]
                avg = totals[i] / sc.cycles_per_epoch
                agent.end_epoch(avg)
                rows.append(EpochRow(epoch, i, agent.algorithm, avg, agent.best_quality,
                                     requested[i], given[i], agent.schedule_values()))
            trace.rows.extend(rows)
            trace.events.extend(events)
            if writer is not None:
                writer.write_epoch(rows, events)
            log.debug("epoch %d: %s", epoch, {r.algorithm: round(r.avg_quality, 4) for r in rows})
    finally:
        if writer is not None:
            writer.close()
    return trace


def run_standalone(cfg: ExperimentConfig, agent_index: int) -> RunTrace:
    return run_experiment(cfg.with_overrides(advice=False), agent_ids=[agent_index])
