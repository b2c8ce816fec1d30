"""Policy network with a shared trunk and per-service action branches.

One wide linear trunk (with a residual block and dropout) feeds every
decision; its output vector is partitioned into disjoint contiguous slices,
one per service, and each slice drives that service's own softmax head over
the service's plan list.  The total number of output units is therefore the
sum of the per-service plan counts, never their product.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from torch import nn

__all__ = ["BranchingPolicyNetwork", "RunningNormalizer"]


class RunningNormalizer:
    """Streaming mean/variance standardization of feature vectors.

    Welford updates keep the running population mean and variance; the
    normalized output is clipped to ``[-clip, clip]`` so downstream layers
    never see unbounded magnitudes from outlier features.
    """

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.dim = int(dim)
        self.clip = float(clip)
        self.eps = float(eps)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self._m2 = np.zeros(self.dim)

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return self._m2 / self.count

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"state length {x.shape} != expected ({self.dim},)")
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (x - self.mean)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        z = (x - self.mean) / np.sqrt(self.variance + self.eps)
        return np.clip(z, -self.clip, self.clip)

    def state_dict(self) -> dict:
        return {
            "dim": self.dim,
            "clip": self.clip,
            "eps": self.eps,
            "count": self.count,
            "mean": self.mean.copy(),
            "m2": self._m2.copy(),
        }

    def load_state_dict(self, doc: dict) -> None:
        if int(doc["dim"]) != self.dim:
            raise ValueError(f"normalizer dim {doc['dim']} != expected {self.dim}")
        self.clip = float(doc["clip"])
        self.eps = float(doc["eps"])
        self.count = int(doc["count"])
        self.mean = np.asarray(doc["mean"], dtype=np.float64).copy()
        self._m2 = np.asarray(doc["m2"], dtype=np.float64).copy()


def _head_slices(trunk_width: int, n_heads: int) -> list[tuple[int, int]]:
    """Partition trunk output indices into contiguous per-head slices."""
    if trunk_width < n_heads:
        raise ValueError(
            f"trunk width {trunk_width} cannot feed {n_heads} disjoint heads"
        )
    base, extra = divmod(trunk_width, n_heads)
    slices, lo = [], 0
    for i in range(n_heads):
        hi = lo + base + (1 if i < extra else 0)
        slices.append((lo, hi))
        lo = hi
    return slices


class BranchingPolicyNetwork(nn.Module):
    """Shared trunk + disjoint-slice softmax heads, one per service."""

    def __init__(
        self,
        input_dim: int,
        head_sizes: Sequence[int],
        trunk_width: int = 2048,
        dropout: float = 0.2,
    ):
        super().__init__()
        if not head_sizes or any(int(b) < 1 for b in head_sizes):
            raise ValueError(f"head sizes must be positive, got {list(head_sizes)}")
        self.input_dim = int(input_dim)
        self.head_sizes = [int(b) for b in head_sizes]
        self.trunk_width = int(trunk_width)
        self.head_slices = _head_slices(self.trunk_width, len(self.head_sizes))

        self.input_layer = nn.Linear(self.input_dim, self.trunk_width)
        self.block = nn.Linear(self.trunk_width, self.trunk_width)
        self.dropout = nn.Dropout(float(dropout))
        self.heads = nn.ModuleList(
            nn.Linear(hi - lo, b)
            for (lo, hi), b in zip(self.head_slices, self.head_sizes)
        )

    @property
    def total_action_units(self) -> int:
        return sum(head.out_features for head in self.heads)

    def trunk_forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.input_dim:
            raise ValueError(
                f"state length {x.shape[-1]} != expected {self.input_dim}"
            )
        h = torch.relu(self.input_layer(x))
        return h + self.dropout(torch.relu(self.block(h)))

    def head_logits(self, trunk: torch.Tensor) -> list[torch.Tensor]:
        return [
            head(trunk[..., lo:hi])
            for head, (lo, hi) in zip(self.heads, self.head_slices)
        ]

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        return self.head_logits(self.trunk_forward(x))

    def zero_heads(self) -> None:
        with torch.no_grad():
            for head in self.heads:
                head.weight.zero_()
                head.bias.zero_()
