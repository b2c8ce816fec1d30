"""Policy-gradient routing agent trained over the simulation gateway's HTTP API."""

from .agent import (
    ReinforceAgent,
    Trajectory,
    load_checkpoint,
    queue_feature_indices,
    save_checkpoint,
)
from .client import GatewayClient, GatewayError
from .networks import BranchingPolicyNetwork, RunningNormalizer
from .returns import discounted_returns
from .training import TrainResult, episode_seed, run_random_policy, train

__all__ = [
    "BranchingPolicyNetwork",
    "GatewayClient",
    "GatewayError",
    "ReinforceAgent",
    "RunningNormalizer",
    "TrainResult",
    "Trajectory",
    "discounted_returns",
    "episode_seed",
    "load_checkpoint",
    "queue_feature_indices",
    "run_random_policy",
    "save_checkpoint",
    "train",
]
