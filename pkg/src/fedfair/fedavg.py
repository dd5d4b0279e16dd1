"""FedAVG comparator with TDMA communication-slot accounting.

Each round every agent takes one local gradient step from the broadcast
model and uploads it in its own orthogonal time slot (so reception is
clean); the server averages the uploads and projects onto the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from fedfair.config import RunConfig, step_size
from fedfair.engine import Agent, ModelState, RunTrace
from fedfair.errors import AbortRun
from fedfair.geometry import BallSet, project

Method = Literal["fedavg", "fedfair"]

FEDFAIR_SLOTS_PER_ROUND = 3


def slots_per_round(method: Method, n_agents: int) -> int:
    if method == "fedavg":
        return n_agents
    if method == "fedfair":
        return FEDFAIR_SLOTS_PER_ROUND
    raise ValueError(f"unknown method {method!r}")


def slot_cost(method: Method, n_agents: int, rounds: int) -> int:
    """Uplink time slots consumed by ``rounds`` rounds."""
    if n_agents < 1 or rounds < 0:
        raise ValueError("need n_agents >= 1 and rounds >= 0")
    return slots_per_round(method, n_agents) * rounds


@dataclass
class SlotLedger:
    slots_per_round: int
    cumulative_slots: int = 0

    @classmethod
    def for_method(cls, method: Method, n_agents: int) -> "SlotLedger":
        return cls(slots_per_round(method, n_agents))

    def charge(self, rounds: int = 1) -> int:
        self.cumulative_slots += self.slots_per_round * rounds
        return self.cumulative_slots


def fedavg_round(theta, agents: Sequence[Agent], eta_k: float, ball: BallSet, iteration: int = -1) -> np.ndarray:
    """``P(mean_i (theta - eta * grad g_i(theta)))``."""
    theta = np.asarray(theta, dtype=float)
    total = None
    for agent in agents:
        grad = agent.loss.grad(theta, agent.dataset)
        if not np.all(np.isfinite(grad)):
            raise AbortRun("non-finite local gradient", iteration, agent.id)
        local = theta - eta_k * grad
        total = local if total is None else total + local
    avg = total / len(agents)
    if not np.all(np.isfinite(avg)):
        raise AbortRun("non-finite average at the server", iteration)
    return project(ball, avg)


def run_fedavg(config: RunConfig, agents: Sequence[Agent], hooks: Callable | None = None, theta0=None) -> RunTrace:
    """FedAVG for ``config.iterations`` rounds on the FedFAir schedule and ball.

    The returned trace carries NaN for the epigraph entries.
    """
    if len(agents) != config.num_agents:
        raise ValueError(f"config expects {config.num_agents} agents, got {len(agents)}")
    ball = BallSet(config.ball_radius, config.model_dim)
    theta = np.zeros(config.model_dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    trace = RunTrace(slots_per_round=slots_per_round("fedavg", len(agents)))
    for k in range(config.iterations + 1):
        eta = step_size(config.schedule, k)
        state = ModelState(theta, math.nan)
        trace.append(state, eta, math.nan)
        if hooks is not None:
            hooks(k, state, eta, math.nan)
        if k < config.iterations:
            theta = fedavg_round(theta, agents, eta, ball, k)
    return trace
