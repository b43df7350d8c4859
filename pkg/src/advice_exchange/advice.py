"""Peer advice: score broadcast, request test, advisor reply and absorption."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .learners import Agent, NetworkAgent
from .mlp import forward
from .qlearning import QLearningAgent
from .sim import StateVector


@dataclass
class Scoreboard:
    """Best epoch averages as broadcast at the last epoch boundary."""

    best: dict[int, float] = field(default_factory=dict)
    participants: frozenset[int] = frozenset()
    epoch: int = 0
    ban_horizon: int = 5
    discount: float = 0.8
    # reward a QL advisee credits to the advised action; None means the advisor's best quality
    ql_reward: float | None = None

    def __post_init__(self):
        if not 0 < self.discount < 1:
            raise ValueError("advice discount must be in (0, 1)")
        if self.ban_horizon < 0:
            raise ValueError("ban horizon must be non-negative")

    def reward_from(self, k: int) -> float:
        return self.best[k] if self.ql_reward is None else self.ql_reward


def broadcast_scores(agents, epoch: int, ban_horizon: int = 5, discount: float = 0.8,
                     ql_reward: float | None = None) -> Scoreboard:
    return Scoreboard(
        best={i: a.best_quality for i, a in enumerate(agents)},
        participants=frozenset(i for i, a in enumerate(agents) if a.participates_in_advice),
        epoch=epoch,
        ban_horizon=ban_horizon,
        discount=discount,
        ql_reward=ql_reward,
    )


def choose_advisor(sb: Scoreboard, i: int) -> int | None:
    peers = sorted(j for j in sb.participants if j != i and math.isfinite(sb.best[j]))
    if not peers:
        return None
    # max() keeps the first of equal scores, i.e. the lowest id
    return max(peers, key=lambda j: sb.best[j])


def should_request(cq_i: float | None, sb: Scoreboard, i: int) -> int | None:
    """Advisor id if agent ``i`` should ask for advice now, else None.

    ``cq_i`` is None when no cycle of the current epoch has completed yet.
    """
    if cq_i is None or sb.epoch < sb.ban_horizon or i not in sb.participants:
        return None
    k = choose_advisor(sb, i)
    if k is None:
        return None
    return k if cq_i < sb.discount * sb.best[k] else None


@dataclass(frozen=True)
class AdviceRequest:
    advisee: int
    advisor: int
    state: StateVector

    def __post_init__(self):
        if self.advisee == self.advisor:
            raise ValueError("an agent cannot advise itself")


@dataclass(frozen=True)
class AdviceReply:
    g: float


def produce_advice(advisor: Agent, s: StateVector) -> AdviceReply:
    """Advisor's answer from its best parameters; its working state is not touched."""
    if isinstance(advisor, QLearningAgent):
        return AdviceReply(advisor.best_response(s))
    if isinstance(advisor, NetworkAgent):
        if advisor.best_weights is None:
            raise RuntimeError(f"advisor {advisor.algorithm} has no best-parameter snapshot")
        return AdviceReply(forward(advisor.best_weights, s))
    raise TypeError(f"{type(advisor).__name__} cannot give advice")


def absorb_advice_nn(agent: NetworkAgent, s: StateVector, g_adv: float) -> NetworkAgent:
    agent.absorb(s, g_adv)
    return agent


def absorb_advice_ql(agent: QLearningAgent, s: StateVector, g_adv: float, reward: float) -> QLearningAgent:
    agent.absorb(s, g_adv, reward)
    return agent


def absorb(agent: Agent, s: StateVector, g_adv: float, advisor_quality: float):
    if isinstance(agent, QLearningAgent):
        absorb_advice_ql(agent, s, g_adv, advisor_quality)
    elif isinstance(agent, NetworkAgent):
        absorb_advice_nn(agent, s, g_adv)
    else:
        raise TypeError(f"{type(agent).__name__} does not take advice")


def greedy_response(agent: Agent, s: StateVector) -> float:
    """Deterministic current response, used for logging only (no RNG draws)."""
    if isinstance(agent, QLearningAgent):
        return agent.best_response(s)
    if isinstance(agent, NetworkAgent):
        return forward(agent.working, s)
    return agent.act(s)


@dataclass
class AdviceEvent:
    epoch: int
    cycle: int
    advisee: int
    advisor: int
    state: list
    advised_g: float
    pre_response: float
    post_response: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "cycle": self.cycle,
            "advisee": self.advisee,
            "advisor": self.advisor,
            "state": [float(x) for x in self.state],
            "advised_g": float(self.advised_g),
            "pre_response": float(self.pre_response),
            "post_response": float(self.post_response),
        }


def exchange(agents, i: int, sb: Scoreboard, cq_i: float | None, s: StateVector,
             epoch: int, cycle: int) -> AdviceEvent | None:
    """Steps 3-4 of the advice sequence for advisee ``i`` on one cycle."""
    k = should_request(cq_i, sb, i)
    if k is None:
        return None
    advisee = agents[i]
    reply = produce_advice(agents[k], s)
    pre = greedy_response(advisee, s)
    absorb(advisee, s, reply.g, sb.reward_from(k))
    post = greedy_response(advisee, s)
    return AdviceEvent(epoch, cycle, i, k, list(np.asarray(s.as_array())), reply.g, pre, post)
