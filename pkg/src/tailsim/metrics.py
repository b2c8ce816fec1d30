"""Latency percentiles, CDF tables and queue-congestion summaries.

Percentiles are nearest-rank (the ⌈p·n⌉-th smallest value): exact on small
samples and conservative at extreme quantiles.  Requests that never finished
(latency +inf, drain-cap casualties) are excluded from finite statistics and
reported as a separate count so an overloaded run cannot silently contaminate
its median.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LatencySummary",
    "percentile",
    "export_cdf",
    "average_queue_length",
    "summarize_latencies",
]


def percentile(values: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ⌈p·n⌉-th smallest of ``values``."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must be in (0, 1], got {p}")
    arr = np.sort(np.asarray(values, dtype=float))
    n = arr.shape[0]
    if n == 0:
        raise ValueError("empty input")
    rank = math.ceil(p * n)
    return float(arr[rank - 1])


def export_cdf(values: Sequence[float], resolution: int = 512) -> list[tuple[float, float]]:
    """Step table of the empirical CDF: sorted (value, fraction ≤ value).

    Duplicate values collapse to their highest fraction; tables longer than
    ``resolution`` are downsampled evenly with the final point (fraction 1)
    always kept.  Non-finite values are dropped before the table is built.
    """
    arr = np.asarray(values, dtype=float)
    arr = np.sort(arr[np.isfinite(arr)])
    n = arr.shape[0]
    if n == 0:
        raise ValueError("empty input (no finite values)")
    # Last occurrence of each distinct value carries the cumulative fraction.
    distinct_mask = np.empty(n, dtype=bool)
    distinct_mask[:-1] = arr[:-1] != arr[1:]
    distinct_mask[-1] = True
    xs = arr[distinct_mask]
    fs = (np.flatnonzero(distinct_mask) + 1) / n
    if xs.shape[0] > resolution:
        idx = np.unique(np.linspace(0, xs.shape[0] - 1, num=resolution).round().astype(int))
        xs, fs = xs[idx], fs[idx]
    return [(float(x), float(f)) for x, f in zip(xs, fs)]


def average_queue_length(snapshots: Iterable) -> tuple[dict[int, float], float]:
    """Mean total queue length (q_up+q_srv+q_down) per server, and overall.

    The overall figure is the plain mean of the per-server means.
    """
    totals: dict[int, float] = {}
    counts: dict[int, int] = {}
    for snap in snapshots:
        j = snap.server_id
        totals[j] = totals.get(j, 0.0) + snap.q_up + snap.q_srv + snap.q_down
        counts[j] = counts.get(j, 0) + 1
    if not totals:
        raise ValueError("at least one snapshot required")
    per_server = {j: totals[j] / counts[j] for j in sorted(totals)}
    overall = sum(per_server.values()) / len(per_server)
    return per_server, overall


@dataclass(frozen=True)
class LatencySummary:
    """Finite-latency percentile summary plus the unfinished-request count."""

    count: int
    p50: float
    p90: float
    p95: float
    p99: float
    p999: float
    mean: float
    max: float
    infinite: int

    def as_dict(self) -> dict:
        return asdict(self)


def summarize_latencies(latencies: Sequence[float]) -> LatencySummary:
    arr = np.asarray(latencies, dtype=float)
    finite = arr[np.isfinite(arr)]
    infinite = int(arr.shape[0] - finite.shape[0])
    if finite.shape[0] == 0:
        raise ValueError("no finite latencies to summarize")
    return LatencySummary(
        count=int(finite.shape[0]),
        p50=percentile(finite, 0.50),
        p90=percentile(finite, 0.90),
        p95=percentile(finite, 0.95),
        p99=percentile(finite, 0.99),
        p999=percentile(finite, 0.999),
        mean=float(finite.mean()),
        max=float(finite.max()),
        infinite=infinite,
    )
