"""Experiment driver: config files, trace recording and output files."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from fedfair import engine
from fedfair.channel import ChannelSpec, expected_h
from fedfair.config import PenaltyWeights, RunConfig, StepSchedule
from fedfair.datagen import DataGenSpec, default_noise_scales, default_sizes, generate
from fedfair.engine import Agent, ModelState, make_agents
from fedfair.errors import AbortRun, ConfigError
from fedfair.fedavg import run_fedavg, slot_cost, slots_per_round
from fedfair.geometry import norm
from fedfair.losses import AgentDataset, LogisticLoss, epigraph_value
from fedfair.metrics import ConfusionMatrix, accuracy, agent_losses, confusion, worst_agent_loss

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "k",
    "eta",
    "alpha",
    "v",
    "minmax_obj",
    "penalty_obj",
    "gap",
    "theta_norm",
    "test_accuracy",
    "slots_used",
)

# key -> parser; exact names are part of the command-line contract
_FLOAT = float
_INT = int


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


CONFIG_KEYS = {
    # run
    "num_agents": _INT,
    "model_dim": _INT,
    "ball_radius": _FLOAT,
    "step_c0": _FLOAT,
    "step_exponent": _FLOAT,
    "penalty_weight": _floats,
    "channel_dist": _str,
    "channel_lo": _FLOAT,
    "channel_hi": _FLOAT,
    "channel_scale": _FLOAT,
    "channel_floor": _FLOAT,
    "channel_gains": _floats,
    "iterations": _INT,
    "seed": _INT,
    "record_every": _INT,
    "alpha0": _FLOAT,
    # data generation
    "train_size_base": _INT,
    "train_size_step": _INT,
    "noise_lo": _FLOAT,
    "noise_hi": _FLOAT,
    "shift_scale": _FLOAT,
    "shift_mode": _str,
    "noise_family": _str,
    "bias_feature": _bool,
    "test_size": _INT,
}


def parse_kv(text: str) -> dict[str, object]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
        elif ":" in line:
            key, _, value = line.partition(":")
        else:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}", lineno, key)
        if key in values:
            raise ConfigError(f"duplicate config key {key!r}", lineno, key)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno, key)
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, key) from None
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunConfig
    data: DataGenSpec
    record_every: int = 1
    alpha0: float | None = None


def build_config(values: dict[str, object]) -> ExperimentConfig:
    """Assemble an :class:`ExperimentConfig` from parsed values, filling defaults."""
    v = dict(values)
    n = int(v.get("num_agents", 12))
    m = int(v.get("model_dim", 4))
    try:
        pw = v.get("penalty_weight", (2.0,))
        weights = PenaltyWeights(pw * n if len(pw) == 1 else pw)
        dist = v.get("channel_dist", "uniform")
        if dist not in ("uniform", "rayleigh"):
            raise ValueError(f"channel_dist must be 'uniform' or 'rayleigh', got {dist!r}")
        channel = ChannelSpec(
            distribution=dist,
            lo=v.get("channel_lo", 0.5),
            hi=v.get("channel_hi", 2.0),
            scale=v.get("channel_scale", 1.0),
            floor=v.get("channel_floor", 0.1),
            agent_gains=v.get("channel_gains"),
        )
        run = RunConfig(
            num_agents=n,
            model_dim=m,
            ball_radius=v.get("ball_radius", 10.0),
            schedule=StepSchedule(v.get("step_c0", 0.1), v.get("step_exponent", 0.6)),
            weights=weights,
            channel_spec=channel,
            iterations=v.get("iterations", 10_000),
            master_seed=v.get("seed", 0),
        )
        data = DataGenSpec(
            n_agents=n,
            dim=m,
            sizes=default_sizes(n, v.get("train_size_base", 50), v.get("train_size_step", 25)),
            noise_scales=default_noise_scales(n, v.get("noise_lo", 0.2), v.get("noise_hi", 1.4)),
            agent_shift_scale=v.get("shift_scale", 1.25),
            shift_mode=v.get("shift_mode", "axis"),
            noise_family=v.get("noise_family", "alternate"),
            bias_feature=v.get("bias_feature", True),
            test_size=v.get("test_size", 2000),
        )
        record_every = int(v.get("record_every", 1))
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(run, data, record_every, v.get("alpha0"))


def load_config(path: str | Path) -> ExperimentConfig:
    return build_config(parse_kv(Path(path).read_text()))


# --- trace recording -------------------------------------------------------


class TraceRecorder:
    """Engine hook turning states into CSV rows.

    ``gap`` is only filled when ``alpha_star`` and the gap weights ``w`` are
    given; the epigraph columns stay empty for runs without ``alpha``.
    """

    def __init__(
        self,
        agents: Sequence[Agent],
        test: AgentDataset | None = None,
        record_every: int = 1,
        slots_per_round: int = 3,
        alpha_star: float | None = None,
        w: Sequence[float] | None = None,
        last_k: int | None = None,
    ):
        self.agents = list(agents)
        self.test = test
        self.record_every = record_every
        self.slots_per_round = slots_per_round
        self.alpha_star = alpha_star
        self.w = None if w is None else list(w)
        self.last_k = last_k
        self.rows: list[dict[str, float | int | None]] = []

    def __call__(self, k: int, state: ModelState, eta: float, v: float) -> None:
        if k % self.record_every and k != self.last_k:
            return
        losses = agent_losses(state.theta, self.agents)
        has_alpha = not math.isnan(state.alpha)
        row: dict[str, float | int | None] = dict.fromkeys(TRACE_COLUMNS)
        row.update(k=k, eta=eta, minmax_obj=max(losses), theta_norm=norm(state.theta), slots_used=self.slots_per_round * k)
        if has_alpha:
            gbar = [epigraph_value(g, state.alpha) for g in losses]
            row.update(
                alpha=state.alpha,
                v=v,
                penalty_obj=state.alpha + sum(a.weight * g for a, g in zip(self.agents, gbar)),
            )
            if self.alpha_star is not None and self.w is not None:
                row["gap"] = state.alpha - self.alpha_star + sum(wi * g for wi, g in zip(self.w, gbar))
        if self.test is not None:
            row["test_accuracy"] = accuracy(state.theta, self.test)
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_trace(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in TRACE_COLUMNS])


def read_trace(path: str | Path) -> list[dict[str, float | int | None]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        for rec in reader:
            row: dict[str, float | int | None] = {}
            for c in TRACE_COLUMNS:
                s = rec[c]
                if s == "":
                    row[c] = None
                elif c in ("k", "slots_used"):
                    row[c] = int(s)
                else:
                    row[c] = float(s)
            rows.append(row)
    return rows


def write_confusion(cm: ConfusionMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["", "pred_0", "pred_1"])
        w.writerow(["true_0", cm.tn, cm.fp])
        w.writerow(["true_1", cm.fn, cm.tp])


def read_confusion(path: str | Path) -> ConfusionMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    (tn, fp), (fn, tp) = [[int(x) for x in r[1:]] for r in rows[1:3]]
    return ConfusionMatrix(tn, fp, fn, tp)


def write_summary(summary: dict[str, object], path: str | Path) -> None:
    with open(path, "w") as fh:
        for key, value in summary.items():
            fh.write(f"{key} = {value}\n")


def read_summary(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


# --- driver ----------------------------------------------------------------


@dataclass
class MethodResult:
    method: str
    trace: engine.RunTrace
    rows: list[dict]
    theta: np.ndarray
    accuracy: float
    confusion: ConfusionMatrix
    worst_loss: float
    worst_agent: int
    slots: int


def build_agents(cfg: ExperimentConfig) -> tuple[list[Agent], AgentDataset]:
    datasets, test = generate(cfg.data, cfg.run.master_seed)
    loss = LogisticLoss()
    agents = make_agents([loss] * len(datasets), datasets, cfg.run.weights.p)
    return agents, test


def run_method(method: str, cfg: ExperimentConfig, agents: Sequence[Agent], test: AgentDataset) -> MethodResult:
    T = cfg.run.iterations
    n = cfg.run.num_agents
    rec = TraceRecorder(agents, test, cfg.record_every, slots_per_round(method, n), last_k=T)
    if method == "fedfair":
        trace = engine.run(cfg.run, agents, rec, alpha0=cfg.alpha0)
    elif method == "fedavg":
        trace = run_fedavg(cfg.run, agents, rec)
    else:
        raise ValueError(f"unknown method {method!r}")
    theta = trace.final.theta
    worst, worst_id = worst_agent_loss(theta, agents)
    return MethodResult(
        method,
        trace,
        rec.rows,
        theta,
        accuracy(theta, test),
        confusion(theta, test),
        worst,
        worst_id,
        slot_cost(method, n, T),
    )


def summarize(results: Sequence[MethodResult], cfg: ExperimentConfig) -> dict[str, object]:
    s: dict[str, object] = {
        "num_agents": cfg.run.num_agents,
        "iterations": cfg.run.iterations,
        "seed": cfg.run.master_seed,
    }
    for r in results:
        s[f"{r.method}_test_accuracy"] = repr(r.accuracy)
        s[f"{r.method}_recall_class0"] = repr(r.confusion.recall0)
        s[f"{r.method}_recall_class1"] = repr(r.confusion.recall1)
        s[f"{r.method}_worst_agent_loss"] = repr(r.worst_loss)
        s[f"{r.method}_worst_agent_id"] = r.worst_agent
        s[f"{r.method}_slots_total"] = r.slots
        s[f"{r.method}_theta"] = " ".join(repr(float(x)) for x in r.theta)
        if r.method == "fedfair":
            s["fedfair_alpha"] = repr(r.trace.final.alpha)
            s["fedfair_max_subgrad_norm"] = repr(r.trace.max_subgrad_norm)
    by = {r.method: r for r in results}
    if "fedfair" in by and "fedavg" in by:
        n = cfg.run.num_agents
        ratio = slots_per_round("fedavg", n) / slots_per_round("fedfair", n)
        s["slot_ratio_fedavg_to_fedfair"] = f"{ratio:g}"
    return s


def run_experiment(
    config_path: str | Path | None,
    out_dir: str | Path,
    method: str = "both",
    seed: int | None = None,
    record_every: int | None = None,
) -> int:
    """Run the configured method(s) and write traces, confusion matrices and a summary.

    Returns a process exit status.
    """
    try:
        values = parse_kv(Path(config_path).read_text()) if config_path else {}
        if seed is not None:
            values["seed"] = seed
        if record_every is not None:
            values["record_every"] = record_every
        cfg = build_config(values)
    except ConfigError as exc:
        log.error("%s: %s", config_path, exc)
        return 2
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return 2

    methods = ["fedfair", "fedavg"] if method == "both" else [method]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agents, test = build_agents(cfg)
    if cfg.run.channel_spec.symmetric is False:
        log.info("E[h] estimated by Monte Carlo: %s", expected_h(cfg.run.channel_spec, cfg.run.num_agents).mean)
    results = []
    try:
        for m in methods:
            log.info("running %s for %d iterations", m, cfg.run.iterations)
            r = run_method(m, cfg, agents, test)
            write_trace(r.rows, out / f"trace_{m}.csv")
            write_confusion(r.confusion, out / f"confusion_{m}.csv")
            results.append(r)
    except AbortRun as exc:
        log.error("run aborted: %s", exc)
        return 3
    write_summary(summarize(results, cfg), out / "summary.txt")
    return 0
