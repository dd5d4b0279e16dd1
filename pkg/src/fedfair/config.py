"""Hyperparameters, the diminishing step-size schedule and penalty weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fedfair.channel import ChannelSpec
from fedfair.errors import InvalidExpectationError
from fedfair.rng import check_seed


@dataclass(frozen=True)
class StepSchedule:
    """``eta(k) = c0 / (k + 1) ** exponent``.

    The exponent is restricted to ``(0.5, 1]`` so that the steps sum to
    infinity while their squares stay summable.
    """

    c0: float = 0.1
    exponent: float = 0.6

    def __post_init__(self):
        if not (self.c0 > 0 and math.isfinite(self.c0)):
            raise ValueError(f"step c0 must be positive, got {self.c0}")
        if not 0.5 < self.exponent <= 1.0:
            raise ValueError(f"step exponent must lie in (0.5, 1], got {self.exponent}")

    def __call__(self, k: int) -> float:
        return step_size(self, k)


def step_size(schedule: StepSchedule, k: int) -> float:
    if k < 0:
        raise ValueError(f"iteration index must be nonnegative, got {k}")
    return schedule.c0 / (k + 1) ** schedule.exponent


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-agent penalty weights; each must exceed 1."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if not p:
            raise ValueError("at least one penalty weight is required")
        bad = [x for x in p if not (x > 1.0 and math.isfinite(x))]
        if bad:
            raise ValueError(f"penalty weights must be finite and > 1, got {bad}")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n: int, value: float = 2.0) -> "PenaltyWeights":
        return cls((value,) * n)

    def __len__(self) -> int:
        return len(self.p)

    def __getitem__(self, i: int) -> float:
        return self.p[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)


def min_weight_threshold(n_agents: int, expected_h_i: float) -> float:
    """Lower bound ``max(1, 1 / (N * E[h_i]))`` that each ``p_i`` must exceed
    for almost-sure convergence of FedFAir."""
    if n_agents < 1:
        raise ValueError(f"number of agents must be positive, got {n_agents}")
    if not (0.0 < expected_h_i <= 1.0):
        raise InvalidExpectationError(f"expected normalized coefficient must lie in (0, 1], got {expected_h_i}")
    return max(1.0, 1.0 / (n_agents * expected_h_i))


def weights_below_threshold(weights: PenaltyWeights, expected_h: Sequence[float]) -> list[int]:
    """Indices (0-based) of agents whose weight does not clear the threshold."""
    n = len(weights)
    return [i for i in range(n) if not weights[i] > min_weight_threshold(n, expected_h[i])]


@dataclass(frozen=True)
class RunConfig:
    num_agents: int = 12
    model_dim: int = 4
    ball_radius: float = 10.0
    schedule: StepSchedule = field(default_factory=StepSchedule)
    weights: PenaltyWeights | None = None
    channel_spec: ChannelSpec = field(default_factory=ChannelSpec)
    iterations: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if self.model_dim < 1:
            raise ValueError("model_dim must be >= 1")
        if not self.ball_radius > 0:
            raise ValueError("ball_radius must be > 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        check_seed(self.master_seed)
        if self.weights is None:
            object.__setattr__(self, "weights", PenaltyWeights.uniform(self.num_agents))
        elif len(self.weights) != self.num_agents:
            raise ValueError(f"{len(self.weights)} penalty weights given for {self.num_agents} agents")
        gains = self.channel_spec.agent_gains
        if gains is not None and len(gains) != self.num_agents:
            raise ValueError(f"{len(gains)} channel gains given for {self.num_agents} agents")
