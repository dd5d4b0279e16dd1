"""Evaluation metrics and the brute-force minmax oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from fedfair.geometry import BallSet
from fedfair.losses import AgentDataset, epigraph_value


def predict(theta, data: AgentDataset) -> np.ndarray:
    """Label 1 iff ``S(theta^T u) >= 0.5``, i.e. ``theta^T u >= 0``."""
    return (data.u @ np.asarray(theta, dtype=float) >= 0.0).astype(int)


def accuracy(theta, test: AgentDataset) -> float:
    if len(test) == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(theta, test) == test.z))


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def recall0(self) -> float:
        """Fraction of class-0 points recognized as 0."""
        n0 = self.tn + self.fp
        return self.tn / n0 if n0 else float("nan")

    @property
    def recall1(self) -> float:
        n1 = self.fn + self.tp
        return self.tp / n1 if n1 else float("nan")

    def as_rows(self) -> list[list[int]]:
        """``[[tn, fp], [fn, tp]]``: rows are true labels, columns predictions."""
        return [[self.tn, self.fp], [self.fn, self.tp]]


def confusion(theta, test: AgentDataset) -> ConfusionMatrix:
    pred = predict(theta, test)
    z = test.z.astype(int)
    return ConfusionMatrix(
        tn=int(np.sum((z == 0) & (pred == 0))),
        fp=int(np.sum((z == 0) & (pred == 1))),
        fn=int(np.sum((z == 1) & (pred == 0))),
        tp=int(np.sum((z == 1) & (pred == 1))),
    )


def agent_losses(theta, agents) -> list[float]:
    return [a.cost(theta) for a in agents]


def worst_agent_loss(theta, agents) -> tuple[float, int]:
    """``(max_i g_i(theta), id)``; ties go to the smallest id."""
    if not agents:
        raise ValueError("need at least one agent")
    losses = agent_losses(theta, agents)
    i = int(np.argmax(losses))
    return losses[i], agents[i].id


def loss_gap(theta, alpha: float, agents, alpha_star: float, w: Sequence[float]) -> float:
    """``alpha - alpha* + sum_i w_i max(g_i(theta) - alpha, 0)``.

    Nonnegative whenever every ``w_i > 1``; zero exactly at the minmax optimum.
    """
    gbar = [epigraph_value(a.cost(theta), alpha) for a in agents]
    return float(alpha - alpha_star + sum(wi * gi for wi, gi in zip(w, gbar)))


# --- brute-force oracle ----------------------------------------------------


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.lo)


@dataclass(frozen=True)
class OracleSolution:
    theta_star: np.ndarray
    alpha_star: float
    grid_resolution: float


def _batch_fn(handle) -> Callable[[np.ndarray], np.ndarray]:
    if hasattr(handle, "loss") and hasattr(handle, "dataset"):
        return lambda th: handle.loss.batch_value(th, handle.dataset)
    if hasattr(handle, "batch_value"):
        return lambda th: handle.batch_value(th, None)
    return lambda th: np.array([handle(t) for t in th], dtype=float)


def grid_oracle(losses: Sequence, region: Box | BallSet, resolution: float | None = None, chunk: int = 250_000) -> OracleSolution:
    """Exhaustive scan of ``max_i g_i`` over a grid of a 1-D or 2-D region.

    ``losses`` may hold agents, loss objects with ``batch_value`` or plain
    callables of one parameter vector. The minimizing grid point is within
    ``L * resolution`` of optimal for ``L``-Lipschitz losses.
    """
    if isinstance(region, BallSet):
        dim = region.dim
        lo, hi = (-region.radius,) * dim, (region.radius,) * dim
    else:
        dim, lo, hi = region.dim, region.lo, region.hi
    if not 1 <= dim <= 2:
        raise NotImplementedError(f"grid oracle supports dimension 1 or 2, got {dim}")
    if resolution is None:
        resolution = 1e-4 if dim == 1 else 1e-2
    fns = [_batch_fn(h) for h in losses]
    if not fns:
        raise ValueError("need at least one loss")

    axes = [np.linspace(a, b, int(round((b - a) / resolution)) + 1) for a, b in zip(lo, hi)]
    if dim == 1:
        pts = axes[0][:, None]
    else:
        g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([g0.ravel(), g1.ravel()])
    if isinstance(region, BallSet):
        pts = pts[np.sum(pts * pts, axis=1) <= region.radius**2]

    best_val, best_pt = np.inf, None
    for start in range(0, len(pts), chunk):
        block = pts[start : start + chunk]
        worst = fns[0](block)
        for f in fns[1:]:
            worst = np.maximum(worst, f(block))
        j = int(np.argmin(worst))
        if worst[j] < best_val:
            best_val, best_pt = float(worst[j]), block[j].copy()
    return OracleSolution(best_pt, best_val, float(resolution))
