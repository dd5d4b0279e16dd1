"""FedFAir: fair federated learning over the air.

One iteration:

1. the central unit computes ``v = alpha - eta / N`` and broadcasts
   ``(theta, v)``;
2. each agent takes a penalty-subgradient step on
   ``p_i * max(g_i(theta) - v, 0)`` and produces ``(theta_i, alpha_i, 1)``;
3. the three quantities are transmitted simultaneously over the fading
   channel;
4. the central unit divides the received sums by the received ``rho`` sum,
   projects the parameter part onto the ball and keeps the scalar part.

The :class:`CentralUnit` only ever receives :class:`~fedfair.channel.ReceivedSums`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from fedfair import channel as ch
from fedfair.config import PenaltyWeights, RunConfig, step_size, weights_below_threshold
from fedfair.errors import AbortRun
from fedfair.geometry import BallSet, project
from fedfair.losses import AgentDataset, EpigraphSubgradient, epigraph_subgrad

log = logging.getLogger(__name__)


class ModelState(NamedTuple):
    theta: np.ndarray
    alpha: float


class LocalUpdate(NamedTuple):
    theta_i: np.ndarray
    alpha_i: float
    rho_i: float = 1.0


@dataclass
class Agent:
    """One participant: private data, penalty weight and loss handle.

    ``id`` is 1-based.
    """

    id: int
    dataset: AgentDataset | None
    weight: float
    loss: object

    def __post_init__(self):
        if not self.weight > 1.0:
            raise ValueError(f"agent {self.id}: penalty weight must exceed 1, got {self.weight}")

    def cost(self, theta) -> float:
        return self.loss.value(theta, self.dataset)

    def cost_and_grad(self, theta) -> tuple[float, np.ndarray]:
        return self.loss.value_and_grad(theta, self.dataset)


def make_agents(losses: Sequence, datasets: Sequence | None = None, weights=None) -> list[Agent]:
    """Zip losses, datasets and weights into 1-based :class:`Agent` objects."""
    n = len(losses)
    datasets = [None] * n if datasets is None else list(datasets)
    if weights is None:
        weights = [2.0] * n
    return [Agent(i + 1, datasets[i], float(weights[i]), losses[i]) for i in range(n)]


def server_pre_step(state: ModelState, eta_k: float, n_agents: int) -> float:
    return state.alpha - eta_k / n_agents


def local_subgradient(agent: Agent, theta: np.ndarray, v: float, iteration: int = -1) -> EpigraphSubgradient:
    g_val, g_grad = agent.loss.value_and_grad(theta, agent.dataset)
    # NaN or inf anywhere makes the squared norm non-finite; it may also just overflow
    if not (math.isfinite(g_val) and (math.isfinite(g_grad @ g_grad) or np.isfinite(g_grad).all())):
        raise AbortRun("non-finite local loss or gradient", iteration, agent.id)
    return epigraph_subgrad(g_val, g_grad, v)


def _step(agent: Agent, theta: np.ndarray, v: float, eta_k: float, sub: EpigraphSubgradient) -> LocalUpdate:
    if not sub.d_alpha:
        return LocalUpdate(theta, v, 1.0)
    return LocalUpdate(theta - eta_k * agent.weight * sub.d_theta, v - eta_k * agent.weight * sub.d_alpha, 1.0)


def local_update(agent: Agent, theta: np.ndarray, v: float, eta_k: float, iteration: int = -1) -> LocalUpdate:
    """Penalty-subgradient step of one agent; ``theta_i`` is not projected."""
    return _step(agent, theta, v, eta_k, local_subgradient(agent, theta, v, iteration))


def server_post_step(theta_agg, alpha_agg: float, ball: BallSet, iteration: int = -1) -> ModelState:
    """Finiteness check and projection; a feasible ``theta_agg`` array is kept, not copied."""
    theta_agg = np.asarray(theta_agg, dtype=float)
    sq = float(theta_agg @ theta_agg)
    # sq is non-finite if any entry is; re-check entrywise in case it merely overflowed
    if not (math.isfinite(alpha_agg) and (math.isfinite(sq) or np.isfinite(theta_agg).all())):
        raise AbortRun("non-finite aggregate at the central unit", iteration)
    if math.sqrt(sq) <= ball.radius and theta_agg.shape == (ball.dim,):
        return ModelState(theta_agg, float(alpha_agg))
    return ModelState(project(ball, theta_agg), float(alpha_agg))


class CentralUnit:
    """Server-side state machine.

    It knows ``N``, the step schedule and the constraint set. Its only input
    from the agents is the triple of superposed sums.
    """

    def __init__(self, state: ModelState, n_agents: int, ball: BallSet, schedule):
        self.state = state
        self.n_agents = n_agents
        self.ball = ball
        self.schedule = schedule
        self.k = 0
        self._refresh()

    def _refresh(self) -> None:
        self.eta = step_size(self.schedule, self.k)
        self.v = server_pre_step(self.state, self.eta, self.n_agents)

    def broadcast(self) -> tuple[np.ndarray, float, float]:
        """Return ``(theta, v, eta)`` for the current iteration."""
        return self.state.theta, self.v, self.eta

    def receive(self, rec: ch.ReceivedSums) -> ModelState:
        theta_agg, alpha_agg = ch.ratios(rec)
        self.state = server_post_step(theta_agg, alpha_agg, self.ball, self.k)
        self.k += 1
        self._refresh()
        return self.state


class Recorder:
    """Hook called with ``(k, state, eta_k, v_k)`` after every iteration
    (and once for the initial state)."""

    def __call__(self, k: int, state: ModelState, eta: float, v: float) -> None:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class RunTrace:
    """States ``beta(k)`` for every iteration, plus run statistics.

    ``max_subgrad_norm`` is the largest penalty-subgradient norm seen by any
    agent, an empirical bound on the subgradients over the iterates.
    """

    thetas: list[np.ndarray] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    etas: list[float] = field(default_factory=list)
    vs: list[float] = field(default_factory=list)
    max_subgrad_norm: float = 0.0
    slots_per_round: int = 3

    def append(self, state: ModelState, eta: float, v: float) -> None:
        self.thetas.append(state.theta)
        self.alphas.append(state.alpha)
        self.etas.append(eta)
        self.vs.append(v)

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def final(self) -> ModelState:
        return ModelState(self.thetas[-1], self.alphas[-1])


def initial_state(agents: Sequence[Agent], dim: int, theta0=None, alpha0: float | None = None) -> ModelState:
    """Default start: ``theta = 0`` and ``alpha = max_i g_i(theta)``."""
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    if alpha0 is None:
        alpha0 = max(a.cost(theta) for a in agents)
    return ModelState(theta, float(alpha0))


def check_weights(config: RunConfig, agents: Sequence[Agent]) -> list[int]:
    """Warn about agents whose weight fails the convergence threshold."""
    eh = ch.expected_h(config.channel_spec, len(agents), master_seed=config.master_seed)
    # three standard errors of slack when E[h] is estimated
    lower = np.clip(eh.mean - 3 * eh.stderr, 1e-300, 1.0)
    bad = weights_below_threshold(PenaltyWeights(tuple(a.weight for a in agents)), lower)
    if bad:
        warnings.warn(
            f"penalty weights of agents {[agents[i].id for i in bad]} do not exceed max(1, 1/(N E[h_i])); "
            "convergence is not guaranteed",
            RuntimeWarning,
            stacklevel=3,
        )
    return bad


def run(
    config: RunConfig,
    agents: Sequence[Agent],
    hooks: Recorder | Callable | None = None,
    theta0=None,
    alpha0: float | None = None,
    channel_fn: Callable[[int], ch.ChannelRealization] | None = None,
) -> RunTrace:
    """Run ``config.iterations`` FedFAir iterations.

    ``channel_fn(k)`` overrides the channel draw, e.g. with a unit channel.
    """
    n = config.num_agents
    if len(agents) != n:
        raise ValueError(f"config expects {n} agents, got {len(agents)}")
    check_weights(config, agents)
    ball = BallSet(config.ball_radius, config.model_dim)
    state = initial_state(agents, config.model_dim, theta0, alpha0)
    if not ball.contains(state.theta):
        raise ValueError("initial theta lies outside the constraint set")
    if channel_fn is None:
        channel_fn = ch.ChannelSource(config.channel_spec, n, config.master_seed)

    server = CentralUnit(state, n, ball, config.schedule)
    trace = RunTrace()
    _record(trace, hooks, 0, state, server.eta, server.v)
    sq_max = 0.0  # largest squared subgradient norm
    for k in range(config.iterations):
        theta, v, eta = server.broadcast()
        updates = []
        for agent in agents:
            sub = local_subgradient(agent, theta, v, k)
            if sub.d_alpha:
                sq_max = max(sq_max, float(sub.d_theta @ sub.d_theta) + 1.0)
            updates.append(_step(agent, theta, v, eta, sub))
        state = server.receive(ch.transmit(updates, channel_fn(k)))
        _record(trace, hooks, k + 1, state, server.eta, server.v)
    trace.max_subgrad_norm = math.sqrt(sq_max)
    log.debug("fedfair finished %d iterations, alpha=%.6g", config.iterations, state.alpha)
    return trace


def _record(trace: RunTrace, hooks, k: int, state: ModelState, eta: float, v: float) -> None:
    trace.append(state, eta, v)
    if hooks is not None:
        hooks(k, state, eta, v)
