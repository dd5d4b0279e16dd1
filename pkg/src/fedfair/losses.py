"""Local cost functions and the epigraph penalty built on them.

A loss is any object with ``value(theta, data)`` and ``grad(theta, data)``;
``batch_value(thetas, data)`` evaluates many parameter vectors at once and is
used by the brute-force oracle. Two losses ship: the binary logistic loss
and a scaled quadratic ``scale * ||theta - center||^2`` for toy problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit, log_expit

from fedfair.config import PenaltyWeights


@dataclass(frozen=True)
class AgentDataset:
    """Labeled points ``(u, z)`` with ``u`` in R^m and ``z`` in {0, 1}."""

    u: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float, ndmin=2)
        z = np.array(self.z, dtype=float).reshape(-1)
        if u.shape[0] != z.size or z.size == 0:
            raise ValueError(f"dataset needs matching nonempty features/labels, got {u.shape} and {z.shape}")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("labels must be 0 or 1")
        u.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_points(cls, points) -> "AgentDataset":
        points = list(points)
        return cls(np.array([p[0] for p in points], dtype=float), np.array([p[1] for p in points], dtype=float))

    def __len__(self) -> int:
        return self.z.size

    @property
    def dim(self) -> int:
        return self.u.shape[1]


class LogisticLoss:
    """Mean binary cross-entropy of ``S(theta^T u)`` against ``z``.

    ``log S(x)`` is evaluated through ``scipy.special.log_expit`` so large
    margins of either sign neither overflow nor hit ``log(0)``.
    """

    def value(self, theta, data: AgentDataset) -> float:
        s = data.u @ np.asarray(theta, dtype=float)
        return float(-np.mean(data.z * log_expit(s) + (1.0 - data.z) * log_expit(-s)))

    def grad(self, theta, data: AgentDataset) -> np.ndarray:
        s = data.u @ np.asarray(theta, dtype=float)
        return data.u.T @ (expit(s) - data.z) / len(data)

    def value_and_grad(self, theta, data: AgentDataset) -> tuple[float, np.ndarray]:
        s = data.u @ np.asarray(theta, dtype=float)
        val = -np.mean(data.z * log_expit(s) + (1.0 - data.z) * log_expit(-s))
        return float(val), data.u.T @ (expit(s) - data.z) / len(data)

    def batch_value(self, thetas, data: AgentDataset) -> np.ndarray:
        s = np.asarray(thetas, dtype=float) @ data.u.T
        return -np.mean(data.z * log_expit(s) + (1.0 - data.z) * log_expit(-s), axis=1)


@dataclass(frozen=True)
class QuadraticLoss:
    """``scale * ||theta - center||^2``; ignores the dataset argument."""

    center: tuple[float, ...]
    scale: float = 1.0

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        object.__setattr__(self, "center", tuple(c))
        object.__setattr__(self, "_c", c)

    def value(self, theta, data=None) -> float:
        d = np.asarray(theta, dtype=float) - self._c
        return float(self.scale * (d @ d))

    def grad(self, theta, data=None) -> np.ndarray:
        return 2.0 * self.scale * (np.asarray(theta, dtype=float) - self._c)

    def value_and_grad(self, theta, data=None) -> tuple[float, np.ndarray]:
        d = np.asarray(theta, dtype=float) - self._c
        return float(self.scale * (d @ d)), 2.0 * self.scale * d

    def batch_value(self, thetas, data=None) -> np.ndarray:
        d = np.asarray(thetas, dtype=float) - self._c
        return self.scale * np.sum(d * d, axis=1)


class EpigraphSubgradient(NamedTuple):
    d_theta: np.ndarray
    d_alpha: float


def epigraph_value(g_val: float, alpha: float) -> float:
    return max(g_val - alpha, 0.0)


def epigraph_subgrad(g_val: float, g_grad, alpha: float) -> EpigraphSubgradient:
    """Subgradient of ``max(g(theta) - alpha, 0)`` in ``(theta, alpha)``.

    The kink ``g == alpha`` counts as active. The active ``d_theta`` is
    ``g_grad`` itself, not a copy.
    """
    g_grad = np.asarray(g_grad, dtype=float)
    if g_val >= alpha:
        return EpigraphSubgradient(g_grad, -1.0)
    return EpigraphSubgradient(np.zeros(g_grad.shape), 0.0)


def minmax_objective(losses_per_agent: Sequence[float]) -> float:
    if len(losses_per_agent) == 0:
        raise ValueError("need at least one agent loss")
    return float(max(losses_per_agent))


def penalty_objective(alpha: float, epigraph_values: Sequence[float], weights: PenaltyWeights | Sequence[float]) -> float:
    """``alpha + sum_i p_i * gbar_i``."""
    p = weights.p if isinstance(weights, PenaltyWeights) else tuple(weights)
    if len(p) != len(epigraph_values):
        raise ValueError(f"{len(epigraph_values)} penalty values for {len(p)} weights")
    return float(alpha + sum(pi * gi for pi, gi in zip(p, epigraph_values)))
