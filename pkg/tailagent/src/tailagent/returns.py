"""Discounted return computation for episodic trajectories."""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = ["discounted_returns"]


def discounted_returns(rewards: Sequence[float], sigma: float) -> np.ndarray:
    """Per-step discounted returns by backward recursion.

    ``rewards[n]`` is the reward received after step ``n`` (n = 0..N-1); the
    return of step n is ``G_n = rewards[n] + sigma * G_{n+1}`` with
    ``G_{N-1} = rewards[N-1]``, i.e. the discounted sum of all rewards from
    step n onward.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must be in (0, 1], got {sigma}")
    arr = np.asarray(rewards, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty reward sequence")
    if not np.isfinite(arr).all():
        raise ValueError("rewards must be finite")

    out = np.empty_like(arr)
    acc = 0.0
    for n in range(arr.size - 1, -1, -1):
        acc = arr[n] + sigma * acc
        out[n] = acc
    return out
