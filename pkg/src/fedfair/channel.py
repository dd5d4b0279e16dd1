"""Wireless multiple-access channel with unknown positive coefficients.

Agents transmit simultaneously; the receiver only ever sees the
superposition ``sum_i lambda_i * s_i``. Algorithm steps transmit three
quantities (parameter vector, epigraph value and the constant 1) over one
channel realization, and the central unit divides the first two sums by the
third, which yields convex combinations with the normalized coefficients
``h_i = lambda_i / sum_j lambda_j`` without ever knowing a single
``lambda_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from fedfair import rng as rngmod

Distribution = Literal["uniform", "rayleigh"]


@dataclass(frozen=True)
class ChannelSpec:
    """Law of the coefficients ``lambda_i(k)``, i.i.d. across time and agents.

    ``uniform`` draws from ``U(lo, hi)``; ``rayleigh`` draws a Rayleigh
    magnitude with the given ``scale`` conditioned on being at least
    ``floor``. ``agent_gains`` optionally multiplies agent ``i``'s draws by a
    fixed large-scale gain, which breaks the symmetry between agents while
    keeping independence.
    """

    distribution: Distribution = "uniform"
    lo: float = 0.5
    hi: float = 2.0
    scale: float = 1.0
    floor: float = 0.1
    agent_gains: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.distribution == "uniform":
            if not (0 < self.lo <= self.hi and math.isfinite(self.hi)):
                raise ValueError(f"uniform channel needs 0 < lo <= hi, got lo={self.lo}, hi={self.hi}")
        elif self.distribution == "rayleigh":
            if not (self.scale > 0 and self.floor > 0):
                raise ValueError(f"rayleigh channel needs scale > 0 and floor > 0, got {self.scale}, {self.floor}")
        else:
            raise ValueError(f"unknown channel distribution {self.distribution!r}")
        if self.agent_gains is not None:
            gains = tuple(float(g) for g in self.agent_gains)
            if not all(g > 0 and math.isfinite(g) for g in gains):
                raise ValueError("agent gains must be positive and finite")
            object.__setattr__(self, "agent_gains", gains)

    @property
    def symmetric(self) -> bool:
        return self.agent_gains is None or len(set(self.agent_gains)) <= 1

    @property
    def mean(self) -> float:
        """Mean of one un-scaled draw."""
        if self.distribution == "uniform":
            return 0.5 * (self.lo + self.hi)
        # E[R | R >= f] for Rayleigh(s): f + s*sqrt(pi/2)*exp(f^2/2s^2)*erfc(f/(s*sqrt 2))
        s, f = self.scale, self.floor
        return f + s * math.sqrt(math.pi / 2) * math.exp(f * f / (2 * s * s)) * math.erfc(f / (s * math.sqrt(2)))

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        """Raw draws of shape ``size`` (scaled by agent gains along the last axis)."""
        if self.distribution == "uniform":
            lam = gen.uniform(self.lo, self.hi, size=size)
        else:
            # R^2 given R >= f is f^2 plus an exponential with mean 2 s^2
            lam = np.sqrt(self.floor**2 + gen.exponential(2.0 * self.scale**2, size=size))
        if self.agent_gains is not None:
            lam = lam * np.asarray(self.agent_gains)
        return lam


@dataclass(frozen=True)
class ChannelRealization:
    """Coefficients for one iteration, shared by its three transmission rounds."""

    lam: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float).reshape(-1)
        # NaN fails both comparisons
        if lam.size == 0 or not ((lam > 0) & (lam < math.inf)).all():
            raise ValueError("channel coefficients must be positive and finite")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def _trusted(cls, lam: np.ndarray, iteration: int) -> "ChannelRealization":
        # rows of a block that was validated as a whole
        obj = object.__new__(cls)
        object.__setattr__(obj, "lam", lam)
        object.__setattr__(obj, "iteration", iteration)
        return obj

    def __len__(self) -> int:
        return self.lam.size


class ReceivedSums(NamedTuple):
    """Everything the central unit observes in one iteration."""

    theta_rec: np.ndarray
    alpha_rec: float
    rho_rec: float


# Iterations are drawn in blocks from one stream per block; realization k
# depends only on (spec, N, seed, k).
BLOCK = 1024


def _block(spec: ChannelSpec, n_agents: int, master_seed: int, b: int) -> np.ndarray:
    gen = rngmod.stream(master_seed, rngmod.Purpose.CHANNEL, 0, b)
    lam = spec.sample(gen, (BLOCK, n_agents))
    if not ((lam > 0).all() and np.isfinite(lam).all()):
        raise RuntimeError("channel draw produced a non-positive coefficient")
    lam.setflags(write=False)
    return lam


def draw_channel(spec: ChannelSpec, n_agents: int, k: int, master_seed: int) -> ChannelRealization:
    """Coefficients for iteration ``k``; a pure function of ``(spec, N, k, seed)``."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    if spec.agent_gains is not None and len(spec.agent_gains) != n_agents:
        raise ValueError(f"{len(spec.agent_gains)} gains for {n_agents} agents")
    b, j = divmod(k, BLOCK)
    return ChannelRealization(_block(spec, n_agents, master_seed, b)[j], k)


class ChannelSource:
    """Sequential access to :func:`draw_channel` that caches the current block."""

    def __init__(self, spec: ChannelSpec, n_agents: int, master_seed: int):
        if spec.agent_gains is not None and len(spec.agent_gains) != n_agents:
            raise ValueError(f"{len(spec.agent_gains)} gains for {n_agents} agents")
        self.spec = spec
        self.n_agents = n_agents
        self.master_seed = master_seed
        self._b = -1
        self._lam: np.ndarray | None = None

    def __call__(self, k: int) -> ChannelRealization:
        b, j = divmod(k, BLOCK)
        if b != self._b:
            self._lam = _block(self.spec, self.n_agents, self.master_seed, b)
            self._b = b
        return ChannelRealization._trusted(self._lam[j], k)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Coefficients for iterations ``start..stop-1`` as a ``(stop-start, N)`` array."""
        b0, b1 = start // BLOCK, (stop - 1) // BLOCK
        lam = np.concatenate([_block(self.spec, self.n_agents, self.master_seed, b) for b in range(b0, b1 + 1)])
        return lam[start - b0 * BLOCK : stop - b0 * BLOCK]


def superpose(signals: Sequence, lam: ChannelRealization) -> np.ndarray:
    """Receiver-side sum ``sum_i lambda_i * s_i``."""
    s = np.asarray(signals, dtype=float)
    if s.ndim not in (1, 2) or s.shape[0] != len(lam):
        raise ValueError(f"{s.shape[0] if s.ndim else 0} signals for {len(lam)} coefficients")
    return lam.lam @ s


def transmit(updates: Sequence, lam: ChannelRealization) -> ReceivedSums:
    """Three over-the-air rounds: epigraph values, parameter vectors, then ``rho``.

    All rounds see the same realization ``lam``.
    """
    w = lam.lam
    if len(updates) != w.size:
        raise ValueError(f"{len(updates)} updates for {w.size} coefficients")
    theta_rec = w @ np.array([u.theta_i for u in updates], dtype=float)
    # scalar rounds: correctly rounded sums of the per-agent products
    wl = w.tolist()
    alpha_rec = math.fsum([wi * u.alpha_i for wi, u in zip(wl, updates)])
    rho_rec = math.fsum([wi * u.rho_i for wi, u in zip(wl, updates)])
    return ReceivedSums(theta_rec, float(alpha_rec), float(rho_rec))


def ratios(rec: ReceivedSums) -> tuple[np.ndarray, float]:
    """Central-unit division of the received sums by ``rho_rec``."""
    if not rec.rho_rec > 0:
        raise RuntimeError(f"received rho sum must be positive, got {rec.rho_rec}")
    return rec.theta_rec / rec.rho_rec, rec.alpha_rec / rec.rho_rec


def ota_aggregate(updates: Sequence, lam: ChannelRealization) -> tuple[np.ndarray, float]:
    """``(sum h_i theta_i, sum h_i alpha_i)`` obtained through the channel.

    Projection onto the constraint set is left to the caller.
    """
    for u in updates:
        if u.rho_i != 1.0:
            raise ValueError(f"rho must be 1 on every update, got {u.rho_i}")
    return ratios(transmit(updates, lam))


def normalized(lam: ChannelRealization) -> np.ndarray:
    return lam.lam / lam.lam.sum()


@dataclass(frozen=True)
class ExpectedH:
    """Per-agent ``E[h_i]`` with the standard error of its estimate (0 if exact)."""

    mean: np.ndarray
    stderr: np.ndarray

    @property
    def exact(self) -> bool:
        return not np.any(self.stderr)


def expected_h(spec: ChannelSpec, n_agents: int, draws: int = 100_000, master_seed: int = 0) -> ExpectedH:
    """``E[h_i]`` for every agent.

    Identically distributed coefficients are exchangeable, so ``E[h_i] = 1/N``
    exactly; otherwise the expectation is estimated from ``draws``
    Monte-Carlo realizations.
    """
    if spec.symmetric:
        return ExpectedH(np.full(n_agents, 1.0 / n_agents), np.zeros(n_agents))
    return expected_h_monte_carlo(spec, n_agents, draws, master_seed)


def expected_h_monte_carlo(spec: ChannelSpec, n_agents: int, draws: int = 100_000, master_seed: int = 0) -> ExpectedH:
    gen = rngmod.stream(master_seed, rngmod.Purpose.MONTE_CARLO)
    lam = spec.sample(gen, (draws, n_agents))
    h = lam / lam.sum(axis=1, keepdims=True)
    return ExpectedH(h.mean(axis=0), h.std(axis=0, ddof=1) / math.sqrt(draws))
