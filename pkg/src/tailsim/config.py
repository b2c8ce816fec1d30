"""Cluster/scenario configuration: parsing, validation, plan enumeration.

The canonical units are milliseconds, requests/ms and cycles/ms.  Config
documents carry arrival rates in requests/sec (the natural unit for the
benchmark tables) and are normalized on load.

Schema (JSON)::

    {
      "servers":  [{"id": 1, "r_u": 5.4e6, "r_s": 7.2e6, "r_d": 5.4e6,
                    "supported": [1, 2, 3, 8]}, ...],
      "services": [{"id": 1, "lambda_per_sec": 400.0,
                    "mean_size_cycles": 4.1e7,
                    "size_distribution": "exponential"}, ...],
      "reward":   {"gamma": 40.0, "beta1": 0.1, "beta2": 0.3, "beta3": 0.1,
                   "sigma": 0.99},
      "step":     {"delta_ms": 1000.0, "steps_per_episode": 15},
      "sim":      {"mode": "coupled", "load_scale": 1.0,
                   "horizon_ms": 60000.0, "subset_cap": 6},
      "seed":     42,
      "bench":    {"scenarios": [{"name": "4-8", "servers": 4, "services": 8}],
                   "schedulers": ["rd", "gd", "da"], "seeds": [1, 2, 3],
                   "target_utilization": 0.8}
    }

``reward``, ``step``, ``sim``, ``seed`` and ``bench`` are optional and
default as shown.  Validation is strict: unknown keys, non-positive rates,
services without a supporting server, or a step window shorter than ten tail
thresholds are all rejected with the offending key named.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "ServerSpec",
    "ServiceSpec",
    "RewardConfig",
    "StepConfig",
    "SimConfig",
    "BenchScenario",
    "BenchConfig",
    "SimulationConfig",
    "PlanCatalog",
    "load_config",
    "parse_config",
    "enumerate_plans",
    "build_catalog",
    "subset_config",
    "requests_per_sec_to_per_ms",
    "requests_per_ms_to_per_sec",
]

MS_PER_SEC = 1000.0

SIZE_DISTRIBUTIONS = ("exponential", "deterministic")
SIM_MODES = ("analytic", "coupled")

_DEFAULT_REWARD = {"gamma": 40.0, "beta1": 0.1, "beta2": 0.3, "beta3": 0.1, "sigma": 0.99}
_DEFAULT_STEP = {"delta_ms": 1000.0, "steps_per_episode": 15}
_DEFAULT_SIM = {"mode": "coupled", "load_scale": 1.0, "horizon_ms": 60000.0, "subset_cap": 6}


class ConfigError(ValueError):
    """Configuration document violates the schema; message names the key."""


def requests_per_sec_to_per_ms(value: float) -> float:
    return value / MS_PER_SEC


def requests_per_ms_to_per_sec(value: float) -> float:
    return value * MS_PER_SEC


@dataclass(frozen=True)
class ServerSpec:
    """One edge server: stage rates in cycles/ms and its supported services."""

    id: int
    r_u: float
    r_s: float
    r_d: float
    supported: frozenset[int]

    def stage_rates(self) -> tuple[float, float, float]:
        return (self.r_u, self.r_s, self.r_d)


@dataclass(frozen=True)
class ServiceSpec:
    """One service class: Poisson arrival rate (requests/ms) and task sizes."""

    id: int
    lam: float
    mean_size: float
    size_distribution: str = "exponential"


@dataclass(frozen=True)
class RewardConfig:
    gamma: float
    beta1: float
    beta2: float
    beta3: float
    sigma: float = 0.99


@dataclass(frozen=True)
class StepConfig:
    delta_ms: float
    steps_per_episode: int


@dataclass(frozen=True)
class SimConfig:
    mode: str
    load_scale: float
    horizon_ms: float
    subset_cap: int


@dataclass(frozen=True)
class BenchScenario:
    name: str
    servers: int
    services: int


@dataclass(frozen=True)
class BenchConfig:
    scenarios: tuple[BenchScenario, ...]
    schedulers: tuple[str, ...]
    seeds: tuple[int, ...]
    target_utilization: float
    horizon_ms: float | None = None


@dataclass(frozen=True)
class PlanCatalog:
    """Per-service ordered plan lists; plans are sorted server-id tuples."""

    plans: dict[int, tuple[tuple[int, ...], ...]]
    server_ids: tuple[int, ...]
    service_ids: tuple[int, ...]

    def plans_for(self, service_id: int) -> tuple[tuple[int, ...], ...]:
        return self.plans[service_id]

    def plan_counts(self) -> list[int]:
        return [len(self.plans[i]) for i in self.service_ids]

    def plan_shapes(self) -> list[list[int]]:
        """Per service, the cardinality of each plan (in catalog order)."""
        return [[len(p) for p in self.plans[i]] for i in self.service_ids]


@dataclass(frozen=True)
class SimulationConfig:
    servers: tuple[ServerSpec, ...]
    services: tuple[ServiceSpec, ...]
    reward: RewardConfig
    step: StepConfig
    sim: SimConfig
    seed: int
    bench: BenchConfig | None = None

    @property
    def num_servers(self) -> int:
        return len(self.servers)

    @property
    def num_services(self) -> int:
        return len(self.services)

    @property
    def size_quantum(self) -> int:
        """Cycle quantum making even splits exact for any plan cardinality."""
        return math.lcm(*range(1, self.sim.subset_cap + 1))

    def lambda_vector(self) -> np.ndarray:
        """Effective arrival rates (requests/ms) with load_scale applied."""
        return np.array(
            [s.lam * self.sim.load_scale for s in self.services], dtype=float
        )

    def sizes_vector(self) -> np.ndarray:
        return np.array([s.mean_size for s in self.services], dtype=float)

    def server_by_id(self, server_id: int) -> ServerSpec:
        return self.servers[server_id - 1]

    def to_dict(self) -> dict:
        """Effective config document (defaults materialized); JSON-safe."""
        doc = {
            "servers": [
                {
                    "id": s.id,
                    "r_u": s.r_u,
                    "r_s": s.r_s,
                    "r_d": s.r_d,
                    "supported": sorted(s.supported),
                }
                for s in self.servers
            ],
            "services": [
                {
                    "id": s.id,
                    "lambda_per_sec": requests_per_ms_to_per_sec(s.lam),
                    "mean_size_cycles": s.mean_size,
                    "size_distribution": s.size_distribution,
                }
                for s in self.services
            ],
            "reward": {
                "gamma": self.reward.gamma,
                "beta1": self.reward.beta1,
                "beta2": self.reward.beta2,
                "beta3": self.reward.beta3,
                "sigma": self.reward.sigma,
            },
            "step": {
                "delta_ms": self.step.delta_ms,
                "steps_per_episode": self.step.steps_per_episode,
            },
            "sim": {
                "mode": self.sim.mode,
                "load_scale": self.sim.load_scale,
                "horizon_ms": self.sim.horizon_ms,
                "subset_cap": self.sim.subset_cap,
            },
            "seed": self.seed,
        }
        if self.bench is not None:
            doc["bench"] = {
                "scenarios": [
                    {"name": sc.name, "servers": sc.servers, "services": sc.services}
                    for sc in self.bench.scenarios
                ],
                "schedulers": list(self.bench.schedulers),
                "seeds": list(self.bench.seeds),
                "target_utilization": self.bench.target_utilization,
            }
            if self.bench.horizon_ms is not None:
                doc["bench"]["horizon_ms"] = self.bench.horizon_ms
        return doc

    def with_updates(self, **updates) -> "SimulationConfig":
        """Return a revalidated copy with selected scalar fields replaced.

        Accepted keys: mode, load_scale, horizon_ms, subset_cap (sim);
        delta_ms, steps_per_episode (step); gamma, beta1..beta3, sigma
        (reward); seed.
        """
        doc = self.to_dict()
        targets = {
            "mode": ("sim", "mode"),
            "load_scale": ("sim", "load_scale"),
            "horizon_ms": ("sim", "horizon_ms"),
            "subset_cap": ("sim", "subset_cap"),
            "delta_ms": ("step", "delta_ms"),
            "steps_per_episode": ("step", "steps_per_episode"),
            "gamma": ("reward", "gamma"),
            "beta1": ("reward", "beta1"),
            "beta2": ("reward", "beta2"),
            "beta3": ("reward", "beta3"),
            "sigma": ("reward", "sigma"),
            "seed": ("seed",),
        }
        for key, value in updates.items():
            if key not in targets:
                raise ConfigError(f"unknown update key: {key}")
            path = targets[key]
            if len(path) == 1:
                doc[path[0]] = value
            else:
                doc[path[0]][path[1]] = value
        return parse_config(doc)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _check_keys(obj: dict, allowed: Iterable[str], path: str) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key: {path}.{key}" if path else f"unknown key: {key}")


def _number(obj: dict, key: str, path: str, *, positive: bool = True, default=None) -> float:
    if key not in obj:
        if default is not None:
            return float(default)
        raise ConfigError(f"missing key: {path}.{key}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    value = float(value)
    if positive and value <= 0.0:
        raise ConfigError(f"{path}.{key}: must be > 0, got {value}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}.{key}: must be finite")
    return value


def _integer(obj: dict, key: str, path: str, *, minimum: int = 1, default=None) -> int:
    if key not in obj:
        if default is not None:
            return int(default)
        raise ConfigError(f"missing key: {path}.{key}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {value}")
    return value


def _parse_servers(raw: list, path: str = "servers") -> tuple[ServerSpec, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty list")
    servers = []
    for idx, entry in enumerate(raw):
        where = f"{path}[{idx}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        _check_keys(entry, ("id", "r_u", "r_s", "r_d", "supported"), where)
        server_id = _integer(entry, "id", where)
        rates = {k: _number(entry, k, where) for k in ("r_u", "r_s", "r_d")}
        supported = entry.get("supported")
        if not isinstance(supported, list) or not supported:
            raise ConfigError(f"{where}.supported: expected a non-empty list")
        if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in supported):
            raise ConfigError(f"{where}.supported: entries must be positive integers")
        servers.append(
            ServerSpec(
                id=server_id,
                r_u=rates["r_u"],
                r_s=rates["r_s"],
                r_d=rates["r_d"],
                supported=frozenset(supported),
            )
        )
    servers.sort(key=lambda s: s.id)
    ids = [s.id for s in servers]
    if ids != list(range(1, len(ids) + 1)):
        raise ConfigError(f"{path}: ids must be unique and dense 1..M, got {ids}")
    return tuple(servers)


def _parse_services(raw: list, path: str = "services") -> tuple[ServiceSpec, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty list")
    services = []
    seen = set()
    for idx, entry in enumerate(raw):
        where = f"{path}[{idx}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        _check_keys(
            entry, ("id", "lambda_per_sec", "mean_size_cycles", "size_distribution"), where
        )
        service_id = _integer(entry, "id", where)
        if service_id in seen:
            raise ConfigError(f"{where}.id: duplicate service id {service_id}")
        seen.add(service_id)
        lam = requests_per_sec_to_per_ms(_number(entry, "lambda_per_sec", where))
        mean_size = _number(entry, "mean_size_cycles", where)
        dist = entry.get("size_distribution", "exponential")
        if dist not in SIZE_DISTRIBUTIONS:
            raise ConfigError(
                f"{where}.size_distribution: expected one of {SIZE_DISTRIBUTIONS}, got {dist!r}"
            )
        services.append(
            ServiceSpec(id=service_id, lam=lam, mean_size=mean_size, size_distribution=dist)
        )
    services.sort(key=lambda s: s.id)
    return tuple(services)


def _parse_bench(raw: dict) -> BenchConfig:
    _check_keys(
        raw, ("scenarios", "schedulers", "seeds", "target_utilization", "horizon_ms"), "bench"
    )
    scenarios_raw = raw.get("scenarios", [])
    if not isinstance(scenarios_raw, list):
        raise ConfigError("bench.scenarios: expected a list")
    scenarios = []
    for idx, entry in enumerate(scenarios_raw):
        where = f"bench.scenarios[{idx}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        _check_keys(entry, ("name", "servers", "services"), where)
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where}.name: expected a non-empty string")
        scenarios.append(
            BenchScenario(
                name=name,
                servers=_integer(entry, "servers", where),
                services=_integer(entry, "services", where),
            )
        )
    schedulers = tuple(raw.get("schedulers", ["rd", "gd", "da"]))
    for s in schedulers:
        if s not in ("rd", "gd", "da", "policy"):
            raise ConfigError(f"bench.schedulers: unknown scheduler {s!r}")
    seeds_raw = raw.get("seeds", [1, 2, 3, 4, 5])
    if not isinstance(seeds_raw, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in seeds_raw
    ):
        raise ConfigError("bench.seeds: expected a list of integers")
    target = _number(raw, "target_utilization", "bench", default=0.8)
    horizon = None
    if "horizon_ms" in raw:
        horizon = _number(raw, "horizon_ms", "bench")
    return BenchConfig(
        scenarios=tuple(scenarios),
        schedulers=schedulers,
        seeds=tuple(seeds_raw),
        target_utilization=target,
        horizon_ms=horizon,
    )


def parse_config(doc: dict) -> SimulationConfig:
    """Validate a config document and normalize units."""
    if not isinstance(doc, dict):
        raise ConfigError("config root: expected an object")
    _check_keys(doc, ("servers", "services", "reward", "step", "sim", "seed", "bench"), "")
    if "servers" not in doc:
        raise ConfigError("missing key: servers")
    if "services" not in doc:
        raise ConfigError("missing key: services")

    servers = _parse_servers(doc["servers"])
    services = _parse_services(doc["services"])

    service_ids = {s.id for s in services}
    for idx, server in enumerate(servers):
        stray = server.supported - service_ids
        if stray:
            raise ConfigError(
                f"servers[{idx}].supported: unknown service ids {sorted(stray)}"
            )
    supported_union = frozenset().union(*(s.supported for s in servers))
    for service in services:
        if service.id not in supported_union:
            raise ConfigError(f"unsupported service {service.id}: no server supports it")

    reward_raw = doc.get("reward", {})
    _check_keys(reward_raw, tuple(_DEFAULT_REWARD), "reward")
    reward = RewardConfig(
        gamma=_number(reward_raw, "gamma", "reward", default=_DEFAULT_REWARD["gamma"]),
        beta1=_number(reward_raw, "beta1", "reward", default=_DEFAULT_REWARD["beta1"]),
        beta2=_number(reward_raw, "beta2", "reward", default=_DEFAULT_REWARD["beta2"]),
        beta3=_number(reward_raw, "beta3", "reward", default=_DEFAULT_REWARD["beta3"]),
        sigma=_number(reward_raw, "sigma", "reward", default=_DEFAULT_REWARD["sigma"]),
    )
    if reward.sigma > 1.0:
        raise ConfigError(f"reward.sigma: must be in (0, 1], got {reward.sigma}")

    step_raw = doc.get("step", {})
    _check_keys(step_raw, tuple(_DEFAULT_STEP), "step")
    step = StepConfig(
        delta_ms=_number(step_raw, "delta_ms", "step", default=_DEFAULT_STEP["delta_ms"]),
        steps_per_episode=_integer(
            step_raw, "steps_per_episode", "step", default=_DEFAULT_STEP["steps_per_episode"]
        ),
    )
    if step.delta_ms < 10.0 * reward.gamma:
        raise ConfigError(
            f"step.delta_ms: window must satisfy delta >= 10*gamma "
            f"({step.delta_ms} < {10.0 * reward.gamma})"
        )

    sim_raw = doc.get("sim", {})
    _check_keys(sim_raw, tuple(_DEFAULT_SIM), "sim")
    mode = sim_raw.get("mode", _DEFAULT_SIM["mode"])
    if mode not in SIM_MODES:
        raise ConfigError(f"sim.mode: expected one of {SIM_MODES}, got {mode!r}")
    sim = SimConfig(
        mode=mode,
        load_scale=_number(sim_raw, "load_scale", "sim", default=_DEFAULT_SIM["load_scale"]),
        horizon_ms=_number(sim_raw, "horizon_ms", "sim", default=_DEFAULT_SIM["horizon_ms"]),
        subset_cap=_integer(sim_raw, "subset_cap", "sim", default=_DEFAULT_SIM["subset_cap"]),
    )

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed: expected an integer, got {seed!r}")

    bench = _parse_bench(doc["bench"]) if "bench" in doc else None

    return SimulationConfig(
        servers=servers,
        services=services,
        reward=reward,
        step=step,
        sim=sim,
        seed=seed,
        bench=bench,
    )


def load_config(path) -> SimulationConfig:
    """Read and validate a JSON config file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


def subset_config(config: SimulationConfig, num_servers: int, num_services: int) -> SimulationConfig:
    """Prefix-select the first N servers and I services (bench scenario cells)."""
    if not (1 <= num_servers <= config.num_servers):
        raise ConfigError(f"subset: servers must be in 1..{config.num_servers}")
    if not (1 <= num_services <= config.num_services):
        raise ConfigError(f"subset: services must be in 1..{config.num_services}")
    doc = config.to_dict()
    doc.pop("bench", None)
    kept_services = {s["id"] for s in doc["services"] if s["id"] <= num_services}
    doc["services"] = [s for s in doc["services"] if s["id"] in kept_services]
    doc["servers"] = [s for s in doc["servers"] if s["id"] <= num_servers]
    for server in doc["servers"]:
        server["supported"] = sorted(set(server["supported"]) & kept_services)
        if not server["supported"]:
            raise ConfigError(
                f"subset: server {server['id']} supports no remaining service"
            )
    return parse_config(doc)


# ---------------------------------------------------------------------------
# plan enumeration
# ---------------------------------------------------------------------------

def enumerate_plans(
    servers: Sequence[ServerSpec], service_id: int, subset_cap: int
) -> list[tuple[int, ...]]:
    """All parallel plans for one service, canonically ordered.

    Plans are the non-empty subsets of the supporting servers up to
    ``subset_cap`` members, ordered by cardinality then lexicographically —
    an order that is prefix-stable as the cap grows.
    """
    if subset_cap < 1:
        raise ConfigError(f"subset_cap: must be >= 1, got {subset_cap}")
    supporters = sorted(s.id for s in servers if service_id in s.supported)
    if not supporters:
        raise ConfigError(f"no supporters for service {service_id}")
    plans: list[tuple[int, ...]] = []
    for size in range(1, min(subset_cap, len(supporters)) + 1):
        plans.extend(itertools.combinations(supporters, size))
    return plans


def build_catalog(config: SimulationConfig) -> PlanCatalog:
    """Enumerate every service's plan list under the configured subset cap."""
    plans = {
        service.id: tuple(enumerate_plans(config.servers, service.id, config.sim.subset_cap))
        for service in config.services
    }
    return PlanCatalog(
        plans=plans,
        server_ids=tuple(s.id for s in config.servers),
        service_ids=tuple(s.id for s in config.services),
    )
