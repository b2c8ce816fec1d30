"""Policy-gradient agent over per-service plan distributions.

The agent observes the gateway state vector, samples one plan per service
from its softmax heads, and after each episode ascends the discounted
score-function objective: one optimizer step on

    loss = -(sum_n sigma^n * G_n * sum_i log pi(a_n^i | s_n))
           + weight_decay * sum ||theta||^2

where G_n are the discounted returns of the collected trajectory.  States
are standardized by a running normalizer; an optional feature mask restricts
the input to a subset of the state vector (used for the queue-statistics
ablation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .networks import BranchingPolicyNetwork, RunningNormalizer
from .returns import discounted_returns

__all__ = [
    "ReinforceAgent",
    "Trajectory",
    "load_checkpoint",
    "queue_feature_indices",
    "save_checkpoint",
]

CHECKPOINT_VERSION = 1


def queue_feature_indices(labels: Sequence[str]) -> list[int]:
    """Indices of the per-server queue-statistic features (q_* labels)."""
    return [k for k, label in enumerate(labels) if ".q_" in label]


@dataclass
class Trajectory:
    """One episode: states, chosen plan indices, and per-step rewards."""

    states: list
    actions: list
    rewards: list = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) == len(self.rewards)):
            raise ValueError(
                "trajectory length mismatch: "
                f"{len(self.states)} states, {len(self.actions)} actions, "
                f"{len(self.rewards)} rewards"
            )
        if self.states and not np.isfinite(self.rewards).all():
            raise ValueError("rewards must be finite")

    def __len__(self) -> int:
        return len(self.states)


class ReinforceAgent:
    def __init__(
        self,
        input_dim: int,
        head_sizes: Sequence[int],
        *,
        trunk_width: int = 2048,
        dropout: float = 0.2,
        lr: float = 1e-4,
        sigma: float = 0.99,
        weight_decay: float = 1e-4,
        feature_indices: Sequence[int] | None = None,
        seed: int = 0,
        dtype: torch.dtype | None = None,
    ):
        self.raw_input_dim = int(input_dim)
        self.feature_indices = (
            None if feature_indices is None else [int(k) for k in feature_indices]
        )
        if self.feature_indices is not None:
            bad = [k for k in self.feature_indices if not 0 <= k < self.raw_input_dim]
            if bad:
                raise ValueError(f"feature indices out of range: {bad}")
        effective_dim = (
            self.raw_input_dim
            if self.feature_indices is None
            else len(self.feature_indices)
        )
        self.sigma = float(sigma)
        self.weight_decay = float(weight_decay)
        self.lr = float(lr)
        self.seed = int(seed)
        self._dtype = dtype if dtype is not None else torch.get_default_dtype()
        self._spec = {
            "input_dim": self.raw_input_dim,
            "head_sizes": [int(b) for b in head_sizes],
            "trunk_width": int(trunk_width),
            "dropout": float(dropout),
            "lr": self.lr,
            "sigma": self.sigma,
            "weight_decay": self.weight_decay,
            "feature_indices": self.feature_indices,
            "seed": self.seed,
            "dtype": str(self._dtype).removeprefix("torch."),
        }

        with torch.random.fork_rng():
            torch.manual_seed(self.seed)
            self.network = BranchingPolicyNetwork(
                effective_dim, head_sizes, trunk_width=trunk_width, dropout=dropout
            ).to(self._dtype)
        self.normalizer = RunningNormalizer(effective_dim)
        self.optimizer = torch.optim.Adam(self.network.parameters(), lr=self.lr)
        self._sampler = torch.Generator().manual_seed(self.seed)

    # -- observation --------------------------------------------------------

    def _filter(self, state) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.raw_input_dim,):
            raise ValueError(
                f"state length {state.shape} != expected ({self.raw_input_dim},)"
            )
        if self.feature_indices is not None:
            state = state[self.feature_indices]
        return state

    def _to_tensor(self, z: np.ndarray) -> torch.Tensor:
        return torch.as_tensor(z, dtype=self._dtype)

    # -- acting --------------------------------------------------------------

    def select_actions(
        self, state, update_stats: bool = False
    ) -> tuple[list[np.ndarray], list[int]]:
        """Per-service plan distributions and one sampled index per service."""
        filtered = self._filter(state)
        if update_stats:
            self.normalizer.update(filtered)
        z = self.normalizer.normalize(filtered)

        was_training = self.network.training
        self.network.eval()
        try:
            with torch.no_grad():
                logits_list = self.network(self._to_tensor(z))
        finally:
            self.network.train(was_training)

        dists, indices = [], []
        for logits in logits_list:
            probs = torch.softmax(logits, dim=-1)
            choice = torch.multinomial(probs, 1, generator=self._sampler)
            dists.append(probs.numpy().astype(np.float64))
            indices.append(int(choice))
        return dists, indices

    def action_payload(self, indices: Sequence[int]) -> list[list[float]]:
        """One-hot plan distributions in the gateway's action format."""
        payload = []
        for b, idx in zip(self.network.head_sizes, indices):
            row = [0.0] * b
            row[int(idx)] = 1.0
            payload.append(row)
        return payload

    # -- learning --------------------------------------------------------------

    def trajectory_loss(self, trajectory: Trajectory) -> torch.Tensor:
        """Differentiable episode loss; pure in the parameters given a trajectory."""
        returns = discounted_returns(trajectory.rewards, self.sigma)
        batch = np.stack(
            [self.normalizer.normalize(self._filter(s)) for s in trajectory.states]
        )
        logits_list = self.network(self._to_tensor(batch))

        n_steps = len(trajectory)
        weights = self._to_tensor(
            np.array([self.sigma**n * returns[n] for n in range(n_steps)])
        )
        actions = np.asarray(trajectory.actions, dtype=np.int64)

        policy_term = torch.zeros((), dtype=self._dtype)
        for i, logits in enumerate(logits_list):
            logp = torch.log_softmax(logits, dim=-1)
            chosen = logp.gather(1, torch.as_tensor(actions[:, i : i + 1])).squeeze(1)
            policy_term = policy_term + (weights * chosen).sum()

        regularizer = sum((p**2).sum() for p in self.network.parameters())
        return -policy_term + self.weight_decay * regularizer

    def update(self, trajectory: Trajectory) -> float:
        """One optimizer step on the episode loss; aborts on non-finite loss."""
        self.network.train()
        loss = self.trajectory_loss(trajectory)
        if not torch.isfinite(loss):
            returns = discounted_returns(trajectory.rewards, self.sigma)
            param_norm = math.sqrt(
                sum(float((p**2).sum()) for p in self.network.parameters())
            )
            raise RuntimeError(
                f"non-finite loss {float(loss.detach())} "
                f"(episode of {len(trajectory)} steps, returns in "
                f"[{returns.min():.4g}, {returns.max():.4g}], "
                f"parameter norm {param_norm:.4g})"
            )
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        return float(loss.detach())


def save_checkpoint(path, agent: ReinforceAgent, extra: dict | None = None) -> None:
    """Self-describing checkpoint: architecture, weights, normalizer, metadata."""
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "spec": dict(agent._spec),
            "model_state": agent.network.state_dict(),
            "normalizer_state": agent.normalizer.state_dict(),
            "meta": dict(extra or {}),
        },
        path,
    )


def load_checkpoint(path) -> ReinforceAgent:
    doc = torch.load(path, weights_only=False)
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    spec = dict(doc["spec"])
    dtype = getattr(torch, spec.pop("dtype"))
    agent = ReinforceAgent(
        spec.pop("input_dim"), spec.pop("head_sizes"), dtype=dtype, **spec
    )
    agent.network.load_state_dict(doc["model_state"])
    agent.normalizer.load_state_dict(doc["normalizer_state"])
    return agent
