"""Poisson request-trace generation.

Each service emits requests as an independent Poisson process; task sizes are
either exponential around the service mean or pinned to it exactly.  The
per-service draws use independent, seed-derived random streams so the trace
for one service never changes when another service is added or removed.

Exponential sizes are quantized to a cycle grid (the config's
``size_quantum``, the LCM of all admissible plan cardinalities) so that an
even split of a task across any plan is exact in floating point:
``k * (size / k) == size`` holds bit-for-bit because ``size / k`` is itself
an integer number of cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimulationConfig

__all__ = ["RequestTrace", "generate_workload"]

# Stream tag folded into the RNG seed sequence; any fixed 24-bit constant
# works, it just has to differ from the tags used by the other components.
_WORKLOAD_STREAM = 0x7261CE

_CHUNK = 4096


@dataclass
class RequestTrace:
    """A time-ordered request trace.

    Attributes
    ----------
    times : float64 array, arrival times in ms, sorted non-decreasing
    service_ids : int64 array, the service class of each request
    sizes : float64 array, task sizes in cycles
    seed : the seed the trace was drawn from
    horizon : the generation horizon in ms
    """

    times: np.ndarray
    service_ids: np.ndarray
    sizes: np.ndarray
    seed: int | tuple[int, ...]
    horizon: float

    def __len__(self) -> int:
        return int(self.times.shape[0])


def seed_entropy(seed: int | tuple[int, ...] | list[int]) -> list[int]:
    """Normalize a seed (single int or composite sequence) to an entropy list."""
    if isinstance(seed, (tuple, list)):
        return [int(s) & 0xFFFFFFFFFFFFFFFF for s in seed]
    return [int(seed) & 0xFFFFFFFFFFFFFFFF]


def _service_stream(seed, service_id: int) -> np.random.Generator:
    return np.random.default_rng([*seed_entropy(seed), _WORKLOAD_STREAM, service_id])


def _draw_arrivals(rng: np.random.Generator, lam: float, horizon: float) -> np.ndarray:
    """Cumulative-sum Poisson arrivals on [0, horizon)."""
    if lam <= 0.0 or horizon <= 0.0:
        return np.empty(0, dtype=float)
    times = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / lam, size=_CHUNK)
        cum = t + np.cumsum(gaps)
        inside = cum[cum < horizon]
        times.append(inside)
        if inside.shape[0] < _CHUNK:
            break
        t = float(cum[-1])
    return np.concatenate(times) if times else np.empty(0, dtype=float)


def generate_workload(
    config: SimulationConfig, seed: int | tuple[int, ...] | None = None
) -> RequestTrace:
    """Draw the full request trace for a configuration.

    Arrival rates are the configured per-service rates with ``load_scale``
    applied.  ``seed`` defaults to the config seed.
    """
    if seed is None:
        seed = config.seed
    if isinstance(seed, list):
        seed = tuple(seed)
    horizon = config.sim.horizon_ms
    quantum = float(config.size_quantum)

    all_times: list[np.ndarray] = []
    all_ids: list[np.ndarray] = []
    all_sizes: list[np.ndarray] = []
    for service in config.services:
        rng = _service_stream(seed, service.id)
        lam = service.lam * config.sim.load_scale
        times = _draw_arrivals(rng, lam, horizon)
        n = times.shape[0]
        if service.size_distribution == "deterministic":
            sizes = np.full(n, float(service.mean_size))
        else:
            raw = rng.exponential(service.mean_size, size=n)
            sizes = np.maximum(quantum, np.round(raw / quantum) * quantum)
        all_times.append(times)
        all_ids.append(np.full(n, service.id, dtype=np.int64))
        all_sizes.append(sizes)

    times = np.concatenate(all_times) if all_times else np.empty(0, dtype=float)
    ids = np.concatenate(all_ids) if all_ids else np.empty(0, dtype=np.int64)
    sizes = np.concatenate(all_sizes) if all_sizes else np.empty(0, dtype=float)

    # Stable merge: time-ordered, ties broken by service id so regeneration
    # is byte-for-byte reproducible.
    order = np.lexsort((ids, times))
    return RequestTrace(
        times=times[order],
        service_ids=ids[order],
        sizes=sizes[order],
        seed=seed,
        horizon=horizon,
    )
