"""Synthetic heterogeneous binary classification data.

Agent ``i`` draws ``z ~ Bernoulli(0.5)`` and ``x = mu_z + delta_i + eps``,
where ``delta_i`` is a fixed per-agent shift and ``eps`` zero-mean noise
whose standard deviation is ``noise_scales[i]``. Noise is Gaussian for
agents with even 1-based id and uniform for odd id when
``noise_family="alternate"``. With ``bias_feature`` the feature vector is
``u = (x, 1)``, so the last model coordinate acts as an intercept.

Shifts come in two flavours. ``"axis"`` moves agent ``i`` by
``shift_signs[i] * agent_shift_scale`` along the unit direction from
``mu_0`` to ``mu_1``; a majority of negative signs biases the average loss
against class 0. ``"random"`` uses a seeded random direction per agent.

The shared test set has no shift and Gaussian noise at the median scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from fedfair import rng as rngmod
from fedfair.losses import AgentDataset


def _default_means(n_features: int = 3) -> tuple[tuple[float, ...], tuple[float, ...]]:
    a = 1.0 / math.sqrt(n_features)
    return (-a,) * n_features, (a,) * n_features


def default_sizes(n_agents: int, base: int = 50, step: int = 25) -> tuple[int, ...]:
    return tuple(base + step * i for i in range(n_agents))


def default_noise_scales(n_agents: int, lo: float = 0.2, hi: float = 1.4) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(lo, hi, n_agents))


def default_shift_signs(n_agents: int) -> tuple[int, ...]:
    """-1 everywhere except the first and last agent."""
    signs = [-1] * n_agents
    if n_agents >= 2:
        signs[0] = signs[-1] = 1
    return tuple(signs)


@dataclass(frozen=True)
class DataGenSpec:
    n_agents: int = 12
    dim: int = 4
    sizes: tuple[int, ...] | None = None
    class_means: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    agent_shift_scale: float = 1.25
    noise_scales: tuple[float, ...] | None = None
    test_size: int = 2000
    bias_feature: bool = True
    shift_mode: Literal["axis", "random"] = "axis"
    shift_signs: tuple[int, ...] | None = None
    noise_family: Literal["alternate", "gaussian", "uniform"] = "alternate"

    def __post_init__(self):
        n = self.n_agents
        if n < 1 or self.dim < 1 or self.test_size < 1:
            raise ValueError("n_agents, dim and test_size must be positive")
        if self.bias_feature and self.dim < 2:
            raise ValueError("a bias feature needs dim >= 2")
        nf = self.n_features
        fill = {
            "sizes": default_sizes(n),
            "class_means": _default_means(nf),
            "noise_scales": default_noise_scales(n),
            "shift_signs": default_shift_signs(n),
        }
        for name, value in fill.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        if len(self.sizes) != n or min(self.sizes) < 1:
            raise ValueError(f"need {n} positive dataset sizes")
        if len(self.noise_scales) != n or min(self.noise_scales) < 0:
            raise ValueError(f"need {n} nonnegative noise scales")
        if len(self.shift_signs) != n:
            raise ValueError(f"need {n} shift signs")
        if any(len(mu) != nf for mu in self.class_means):
            raise ValueError(f"class means must have length {nf}")
        if self.agent_shift_scale < 0:
            raise ValueError("agent_shift_scale must be nonnegative")
        if self.shift_mode not in ("axis", "random"):
            raise ValueError(f"unknown shift mode {self.shift_mode!r}")
        if self.noise_family not in ("alternate", "gaussian", "uniform"):
            raise ValueError(f"unknown noise family {self.noise_family!r}")

    @property
    def n_features(self) -> int:
        """Number of random feature coordinates."""
        return self.dim - 1 if self.bias_feature else self.dim


def _noise(gen: np.random.Generator, family: str, scale: float, shape) -> np.ndarray:
    if family == "gaussian":
        return gen.normal(0.0, scale, size=shape)
    half_width = math.sqrt(3.0) * scale  # uniform with standard deviation `scale`
    return gen.uniform(-half_width, half_width, size=shape)


def _points(gen, spec: DataGenSpec, n: int, shift: np.ndarray, family: str, scale: float) -> AgentDataset:
    mu0, mu1 = (np.asarray(m, dtype=float) for m in spec.class_means)
    z = gen.integers(0, 2, size=n)
    x = np.where(z[:, None] == 1, mu1, mu0) + shift + _noise(gen, family, scale, (n, spec.n_features))
    if spec.bias_feature:
        x = np.hstack([x, np.ones((n, 1))])
    return AgentDataset(x, z.astype(float))


def agent_shift(spec: DataGenSpec, agent: int, master_seed: int) -> np.ndarray:
    """Shift ``delta_i`` of the agent with 0-based index ``agent``."""
    if spec.agent_shift_scale == 0:
        return np.zeros(spec.n_features)
    if spec.shift_mode == "axis":
        mu0, mu1 = (np.asarray(m, dtype=float) for m in spec.class_means)
        axis = mu1 - mu0
        axis = axis / np.linalg.norm(axis)
        return spec.shift_signs[agent] * spec.agent_shift_scale * axis
    d = rngmod.stream(master_seed, rngmod.Purpose.DATA_SHIFT, agent + 1).normal(size=spec.n_features)
    return spec.agent_shift_scale * d / np.linalg.norm(d)


def agent_family(spec: DataGenSpec, agent: int) -> str:
    if spec.noise_family != "alternate":
        return spec.noise_family
    return "uniform" if agent % 2 == 0 else "gaussian"


def generate(spec: DataGenSpec, master_seed: int = 0) -> tuple[list[AgentDataset], AgentDataset]:
    """Per-agent training sets and the shared test set."""
    datasets = []
    for i in range(spec.n_agents):
        gen = rngmod.stream(master_seed, rngmod.Purpose.DATA, i + 1)
        datasets.append(
            _points(gen, spec, spec.sizes[i], agent_shift(spec, i, master_seed), agent_family(spec, i), spec.noise_scales[i])
        )
    gen = rngmod.stream(master_seed, rngmod.Purpose.TEST_DATA)
    test = _points(gen, spec, spec.test_size, np.zeros(spec.n_features), "gaussian", float(np.median(spec.noise_scales)))
    return datasets, test


def heterogeneity_index(datasets: Sequence[AgentDataset]) -> float:
    """Mean pairwise Euclidean distance between per-agent feature means."""
    if len(datasets) < 2:
        raise ValueError("need at least two datasets")
    means = np.array([d.u.mean(axis=0) for d in datasets])
    diffs = means[:, None, :] - means[None, :, :]
    dist = np.sqrt(np.sum(diffs**2, axis=-1))
    iu = np.triu_indices(len(datasets), k=1)
    return float(dist[iu].mean())


# --- CSV dump / load -------------------------------------------------------


def save_dataset(data: AgentDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u_{j + 1}" for j in range(data.dim)] + ["z"])
        for row, z in zip(data.u, data.z):
            w.writerow([repr(float(x)) for x in row] + [int(z)])


def load_dataset(path: str | Path) -> AgentDataset:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[-1] != "z" or not all(h == f"u_{j + 1}" for j, h in enumerate(header[:-1])):
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [[float(x) for x in row] for row in r if row]
    arr = np.array(rows, dtype=float)
    return AgentDataset(arr[:, :-1], arr[:, -1])


def save_datasets(datasets: Sequence[AgentDataset], test: AgentDataset, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, d in enumerate(datasets):
        p = out / f"agent_{i + 1:02d}.csv"
        save_dataset(d, p)
        paths.append(p)
    save_dataset(test, out / "test.csv")
    return paths
