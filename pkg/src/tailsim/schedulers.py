"""Plan-selection policies and the plan-distribution → routing-matrix map.

Four ways to pick a parallel plan for an incoming request:

* random — uniform over the service's plan catalog;
* greedy — the plan with the most servers (ties: lexicographically smallest);
* delay-aware — minimize the predicted completion time
  ``max_{j in plan} sum_stages (backlog_stage(j) + size/|plan|) / r_stage(j)``
  (ties: fewest servers, then lexicographically smallest);
* probabilistic — sample from a per-service distribution over the catalog.

``policy_to_omega`` turns per-service plan distributions into the I×M matrix
of per-server inclusion probabilities ``omega[i, j] = sum_k Pr(plan k of
service i) * 1(server j in plan k)`` — the quantity the tail analytics
consume.  All tie-breaks are total orders so every policy is deterministic
given its inputs (and RNG state, where applicable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import PlanCatalog, SimulationConfig
from .workload import seed_entropy

__all__ = [
    "ServerLoad",
    "PolicyMatrix",
    "policy_to_omega",
    "uniform_policy",
    "choose_plan_random",
    "choose_plan_greedy",
    "choose_plan_delay_aware",
    "choose_plan_probabilistic",
    "make_scheduler",
    "RandomScheduler",
    "GreedyScheduler",
    "DelayAwareScheduler",
    "ProbabilisticScheduler",
    "expected_server_work",
    "mean_utilization",
    "tune_load_scale",
]

_PROB_SUM_TOL = 1e-9

# RNG stream tags (folded into seed sequences; must be distinct per component).
_RD_STREAM = 0x5C4E01
_POLICY_STREAM = 0x5C4E02


@dataclass(frozen=True)
class ServerLoad:
    """Instantaneous per-stage unfinished work (cycles) and rates (cycles/ms)."""

    server_id: int
    backlog: tuple[float, float, float]
    rates: tuple[float, float, float]

    def predicted_delay(self, extra_cycles: float) -> float:
        """Time to clear current backlog plus ``extra_cycles`` at every stage."""
        return sum((b + extra_cycles) / r for b, r in zip(self.backlog, self.rates))


def _validate_distribution(probs, n_plans: int, service_id: int) -> np.ndarray:
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != n_plans:
        raise ValueError(
            f"service {service_id}: distribution length {arr.shape[0] if arr.ndim == 1 else arr.shape} "
            f"!= plan count {n_plans}"
        )
    if np.any(arr < 0.0):
        raise ValueError(f"service {service_id}: probabilities must be >= 0")
    total = float(arr.sum())
    if abs(total - 1.0) > _PROB_SUM_TOL:
        raise ValueError(f"service {service_id}: probabilities sum to {total}, expected 1")
    return arr


def policy_to_omega(
    catalog: PlanCatalog, distributions: Mapping[int, Sequence[float]]
) -> np.ndarray:
    """Per-server inclusion probabilities, rows per service and columns per server."""
    col_index = {server: j for j, server in enumerate(catalog.server_ids)}
    omega = np.zeros((len(catalog.service_ids), len(catalog.server_ids)))
    for i, sid in enumerate(catalog.service_ids):
        plans = catalog.plans_for(sid)
        probs = _validate_distribution(distributions[sid], len(plans), sid)
        for prob, plan in zip(probs, plans):
            for server in plan:
                omega[i, col_index[server]] += prob
    return omega


def uniform_policy(catalog: PlanCatalog) -> dict[int, np.ndarray]:
    """Uniform distribution over each service's plan list."""
    return {
        sid: np.full(len(catalog.plans_for(sid)), 1.0 / len(catalog.plans_for(sid)))
        for sid in catalog.service_ids
    }


@dataclass(frozen=True)
class PolicyMatrix:
    """Validated per-service plan distributions plus the derived omega matrix."""

    catalog: PlanCatalog
    distributions: dict[int, np.ndarray]
    omega: np.ndarray

    @classmethod
    def from_distributions(
        cls, catalog: PlanCatalog, distributions: Mapping[int, Sequence[float]]
    ) -> "PolicyMatrix":
        validated = {
            sid: _validate_distribution(
                distributions[sid], len(catalog.plans_for(sid)), sid
            )
            for sid in catalog.service_ids
        }
        return cls(
            catalog=catalog,
            distributions=validated,
            omega=policy_to_omega(catalog, validated),
        )

    def distribution_for(self, service_id: int) -> np.ndarray:
        return self.distributions[service_id]

    def omega_column(self, server_id: int) -> np.ndarray:
        """Per-service inclusion probabilities for one server."""
        return self.omega[:, self.catalog.server_ids.index(server_id)]


# ---------------------------------------------------------------------------
# plan choosers
# ---------------------------------------------------------------------------

def choose_plan_random(
    catalog: PlanCatalog, service_id: int, rng: np.random.Generator
) -> tuple[int, ...]:
    plans = catalog.plans_for(service_id)
    return plans[int(rng.integers(len(plans)))]


def choose_plan_greedy(catalog: PlanCatalog, service_id: int) -> tuple[int, ...]:
    # Catalog order is (cardinality, lexicographic), so the first plan of the
    # maximal cardinality is the answer.
    return min(catalog.plans_for(service_id), key=lambda p: (-len(p), p))


def choose_plan_delay_aware(
    catalog: PlanCatalog,
    service_id: int,
    loads: Mapping[int, ServerLoad],
    size: float,
) -> tuple[int, ...]:
    best_plan: tuple[int, ...] | None = None
    best_key: tuple[float, int, tuple[int, ...]] | None = None
    for plan in catalog.plans_for(service_id):
        share = size / len(plan)
        predicted = max(loads[server].predicted_delay(share) for server in plan)
        key = (predicted, len(plan), plan)
        if best_key is None or key < best_key:
            best_key = key
            best_plan = plan
    assert best_plan is not None
    return best_plan


def choose_plan_probabilistic(
    catalog: PlanCatalog,
    service_id: int,
    distribution: Sequence[float],
    rng: np.random.Generator,
) -> tuple[int, ...]:
    plans = catalog.plans_for(service_id)
    probs = _validate_distribution(distribution, len(plans), service_id)
    idx = int(rng.choice(len(plans), p=probs / probs.sum()))
    return plans[idx]


# ---------------------------------------------------------------------------
# simulator-facing scheduler objects
# ---------------------------------------------------------------------------

class RandomScheduler:
    name = "rd"
    needs_loads = False

    def __init__(self, catalog: PlanCatalog, seed: int = 0):
        self.catalog = catalog
        self._rng = np.random.default_rng([*seed_entropy(seed), _RD_STREAM])

    def choose(self, service_id: int, size: float, loads=None) -> tuple[int, ...]:
        return choose_plan_random(self.catalog, service_id, self._rng)


class GreedyScheduler:
    name = "gd"
    needs_loads = False

    def __init__(self, catalog: PlanCatalog):
        self.catalog = catalog
        self._choice = {
            sid: choose_plan_greedy(catalog, sid) for sid in catalog.service_ids
        }

    def choose(self, service_id: int, size: float, loads=None) -> tuple[int, ...]:
        return self._choice[service_id]


class DelayAwareScheduler:
    name = "da"
    needs_loads = True

    def __init__(self, catalog: PlanCatalog):
        self.catalog = catalog

    def choose(
        self, service_id: int, size: float, loads: Mapping[int, ServerLoad]
    ) -> tuple[int, ...]:
        return choose_plan_delay_aware(self.catalog, service_id, loads, size)


class ProbabilisticScheduler:
    name = "policy"
    needs_loads = False

    def __init__(
        self,
        catalog: PlanCatalog,
        policy: Mapping[int, Sequence[float]],
        seed: int = 0,
    ):
        self.catalog = catalog
        self.policy = PolicyMatrix.from_distributions(catalog, policy)
        self._rng = np.random.default_rng([*seed_entropy(seed), _POLICY_STREAM])

    def choose(self, service_id: int, size: float, loads=None) -> tuple[int, ...]:
        return choose_plan_probabilistic(
            self.catalog, service_id, self.policy.distribution_for(service_id), self._rng
        )

    def set_distributions(self, policy: Mapping[int, Sequence[float]]) -> None:
        """Swap in new distributions (gateway installs these per step)."""
        self.policy = PolicyMatrix.from_distributions(self.catalog, policy)


def make_scheduler(name: str, catalog: PlanCatalog, seed: int = 0, policy=None):
    """Build a scheduler by its CLI name: rd | gd | da | policy."""
    if name == "rd":
        return RandomScheduler(catalog, seed=seed)
    if name == "gd":
        return GreedyScheduler(catalog)
    if name == "da":
        return DelayAwareScheduler(catalog)
    if name == "policy":
        if policy is None:
            raise ValueError("policy scheduler requires plan distributions")
        return ProbabilisticScheduler(catalog, policy, seed=seed)
    raise ValueError(f"unknown scheduler: {name!r} (expected rd|gd|da|policy)")


# ---------------------------------------------------------------------------
# load tuning
# ---------------------------------------------------------------------------

def expected_server_work(
    config: SimulationConfig,
    catalog: PlanCatalog,
    distributions: Mapping[int, Sequence[float]] | None = None,
) -> np.ndarray:
    """Expected cycles/ms arriving at each server under a plan policy.

    A request of service i dispatched on plan b deposits ``c_i/|b|`` cycles
    at every member (each stage processes the whole sub-task), so server j
    receives ``sum_i lambda_i sum_b Pr_i(b) 1(j in b) c_i/|b|`` cycles/ms.
    """
    if distributions is None:
        distributions = uniform_policy(catalog)
    col_index = {server: j for j, server in enumerate(catalog.server_ids)}
    lam = config.lambda_vector()
    work = np.zeros(len(catalog.server_ids))
    for i, service in enumerate(config.services):
        plans = catalog.plans_for(service.id)
        probs = _validate_distribution(distributions[service.id], len(plans), service.id)
        for prob, plan in zip(probs, plans):
            share = lam[i] * prob * service.mean_size / len(plan)
            for server in plan:
                work[col_index[server]] += share
    return work


def mean_utilization(
    config: SimulationConfig,
    catalog: PlanCatalog,
    distributions: Mapping[int, Sequence[float]] | None = None,
) -> float:
    """Mean over servers and stages of (expected work rate) / (stage rate)."""
    work = expected_server_work(config, catalog, distributions)
    utils = [
        work[j] / rate
        for j, server in enumerate(config.servers)
        for rate in server.stage_rates()
    ]
    return float(np.mean(utils))


def tune_load_scale(
    config: SimulationConfig,
    catalog: PlanCatalog,
    target: float,
    distributions: Mapping[int, Sequence[float]] | None = None,
) -> float:
    """The load_scale at which mean utilization equals ``target``.

    Utilization is linear in load_scale, so a single measurement suffices.
    """
    if target <= 0.0:
        raise ValueError(f"target utilization must be > 0, got {target}")
    current = mean_utilization(config, catalog, distributions)
    if current <= 0.0:
        raise ValueError("zero utilization: no traffic under this policy")
    return config.sim.load_scale * target / current
