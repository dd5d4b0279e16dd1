"""Fair federated learning over a simulated wireless multiple-access channel."""

from fedfair.channel import ChannelRealization, ChannelSpec, draw_channel, expected_h, normalized, ota_aggregate, superpose
from fedfair.config import PenaltyWeights, RunConfig, StepSchedule, min_weight_threshold, step_size
from fedfair.datagen import DataGenSpec, generate, heterogeneity_index
from fedfair.engine import Agent, LocalUpdate, ModelState, RunTrace, make_agents, run
from fedfair.fedavg import fedavg_round, run_fedavg, slot_cost
from fedfair.geometry import BallSet, norm, project
from fedfair.losses import AgentDataset, LogisticLoss, QuadraticLoss
from fedfair.metrics import OracleSolution, accuracy, confusion, grid_oracle, worst_agent_loss

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentDataset",
    "BallSet",
    "ChannelRealization",
    "ChannelSpec",
    "DataGenSpec",
    "LocalUpdate",
    "LogisticLoss",
    "ModelState",
    "OracleSolution",
    "PenaltyWeights",
    "QuadraticLoss",
    "RunConfig",
    "RunTrace",
    "StepSchedule",
    "accuracy",
    "confusion",
    "draw_channel",
    "expected_h",
    "fedavg_round",
    "generate",
    "grid_oracle",
    "heterogeneity_index",
    "make_agents",
    "min_weight_threshold",
    "norm",
    "normalized",
    "ota_aggregate",
    "project",
    "run",
    "run_fedavg",
    "slot_cost",
    "step_size",
    "superpose",
    "worst_agent_loss",
]
