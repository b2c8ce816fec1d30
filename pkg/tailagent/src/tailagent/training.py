"""Episode-loop training against a gateway session.

One training run owns one gateway session: every episode resets it with a
seed derived deterministically from (run seed, episode index), collects a
trajectory of at most ``steps`` windows by sending one-hot plan choices, and
applies one policy-gradient update.  Artifacts are a per-episode reward CSV
and a self-describing checkpoint.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .agent import ReinforceAgent, Trajectory, queue_feature_indices, save_checkpoint
from .client import GatewayClient

__all__ = ["TrainResult", "episode_seed", "run_random_policy", "train"]


def episode_seed(seed: int, episode: int) -> int:
    """Deterministic per-episode reset seed derived from (run seed, episode)."""
    return int(np.random.SeedSequence([int(seed), int(episode)]).generate_state(1)[0])


@dataclass
class TrainResult:
    episode_rewards: np.ndarray
    agent: ReinforceAgent
    rewards_path: Path | None
    checkpoint_path: Path | None


def _rollout(client: GatewayClient, agent: ReinforceAgent, state, steps: int):
    states, actions, rewards = [], [], []
    done = False
    while not done and len(states) < steps:
        _, indices = agent.select_actions(state, update_stats=True)
        out = client.step(agent.action_payload(indices))
        states.append(state)
        actions.append(indices)
        rewards.append(float(out["reward"]))
        state = np.asarray(out["state"], dtype=np.float64)
        done = bool(out["done"])
    return Trajectory(states=states, actions=actions, rewards=rewards)


def train(
    client: GatewayClient,
    *,
    episodes: int,
    steps: int,
    seed: int,
    qla: bool = False,
    out_dir=None,
    lr: float = 1e-4,
    sigma: float = 0.99,
    trunk_width: int = 2048,
    dropout: float = 0.2,
    weight_decay: float = 1e-4,
    log_every: int = 0,
) -> TrainResult:
    if episodes < 1 or steps < 1:
        raise ValueError(f"need episodes >= 1 and steps >= 1, got {episodes}, {steps}")
    torch.manual_seed(seed)
    started = time.monotonic()

    first = client.reset(seed=episode_seed(seed, 0))
    input_dim = len(first["state"])
    head_sizes = [len(shapes) for shapes in first["plan_shapes"]]
    feature_indices = (
        queue_feature_indices(client.spec()["state_labels"]) if qla else None
    )
    agent = ReinforceAgent(
        input_dim,
        head_sizes,
        trunk_width=trunk_width,
        dropout=dropout,
        lr=lr,
        sigma=sigma,
        weight_decay=weight_decay,
        feature_indices=feature_indices,
        seed=seed,
    )

    episode_rewards = np.empty(episodes)
    for k in range(episodes):
        doc = first if k == 0 else client.reset(seed=episode_seed(seed, k))
        trajectory = _rollout(
            client, agent, np.asarray(doc["state"], dtype=np.float64), steps
        )
        agent.update(trajectory)
        episode_rewards[k] = sum(trajectory.rewards)
        if log_every and (k + 1) % log_every == 0:
            recent = episode_rewards[max(0, k - 99) : k + 1]
            print(
                f"episode {k + 1}/{episodes}: reward {episode_rewards[k]:+.3f} "
                f"(mean of last {len(recent)}: {recent.mean():+.3f})"
            )

    rewards_path = checkpoint_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rewards_path = out / "rewards.csv"
        with open(rewards_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "total_reward"])
            for k, total in enumerate(episode_rewards, start=1):
                writer.writerow([k, repr(float(total))])
        checkpoint_path = out / "checkpoint.pt"
        save_checkpoint(
            checkpoint_path,
            agent,
            extra={
                "episodes": episodes,
                "steps": steps,
                "seed": seed,
                "qla": qla,
                "elapsed_s": time.monotonic() - started,
                "final_mean_100": float(episode_rewards[-100:].mean()),
            },
        )
    return TrainResult(
        episode_rewards=episode_rewards,
        agent=agent,
        rewards_path=rewards_path,
        checkpoint_path=checkpoint_path,
    )


def run_random_policy(
    client: GatewayClient, *, episodes: int, steps: int, seed: int
) -> np.ndarray:
    """Per-episode total rewards of uniform plan sampling, on the same
    per-episode reset seeds that `train` would use — the paired baseline."""
    totals = np.empty(episodes)
    for k in range(episodes):
        doc = client.reset(seed=episode_seed(seed, k))
        shapes = [len(s) for s in doc["plan_shapes"]]
        rng = np.random.default_rng([int(seed), int(k), 0x5C4E03])
        total, done, n = 0.0, False, 0
        while not done and n < steps:
            action = []
            for b in shapes:
                row = [0.0] * b
                row[int(rng.integers(b))] = 1.0
                action.append(row)
            out = client.step(action)
            total += out["reward"]
            done = bool(out["done"])
            n += 1
        totals[k] = total
    return totals
