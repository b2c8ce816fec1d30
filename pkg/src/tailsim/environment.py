"""Windowed decision environment over the dispatch simulator.

Each episode replays a fresh workload trace against the cluster.  A step
installs per-service plan distributions, advances the simulator by one
decision window of ``delta_ms``, and returns:

* an observation of 18 numbers per server — twelve queue statistics (max,
  min, mean, variance of the per-stage queue lengths over 101 evenly spaced
  samples spanning the window, including its left boundary) followed by the
  six tail-bound features (eta*, eta', eta'', T, T', T'') evaluated at the
  optimal exponent under the routing matrix the step installed;
* a reward that credits each request exactly once: requests that departed
  get +beta1 (below the threshold) or -beta2 (at or above it); requests
  still in flight whose sojourn already reached the threshold are certain
  tail events and are credited -beta2 immediately; requests younger than
  the threshold are deferred to a later window.  Every credited request
  also pays -beta3 times the mean positive queue growth (window end minus
  window start, clamped at zero, summed over stages) across its plan's
  servers.  Requests still unresolved when the episode ends are charged
  like tail events in the final step's reward.

The crediting sets, deferral lists and per-server growth are exposed per
window through :class:`StepWindow` so rewards can be recomputed offline
from the request and snapshot logs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .analytics import (
    BoundEvaluation,
    PhiTriple,
    aggregate_arrival_rate,
    evaluate_bound,
    mean_task_size,
    service_rates,
    system_tail_bound,
)
from .config import PlanCatalog, SimulationConfig, build_catalog
from .schedulers import PolicyMatrix, ProbabilisticScheduler, uniform_policy
from .simulation import Simulator
from .workload import RequestTrace, generate_workload

__all__ = [
    "SAMPLES_PER_WINDOW",
    "FEATURES_PER_SERVER",
    "StepWindow",
    "Environment",
    "state_labels",
    "routing_phi",
    "server_bound",
]

# Queue statistics are taken from this many evenly spaced samples per window
# (plus the window's left boundary).
SAMPLES_PER_WINDOW = 100

FEATURES_PER_SERVER = 18

_STAGE_TAGS = ("u", "s", "d")
_QSTAT_TAGS = ("q_max", "q_min", "q_ave", "q_var")
_BOUND_TAGS = ("eta_star", "eta_grad", "eta_hess", "mgf", "mgf_grad", "mgf_hess")


def state_labels(config: SimulationConfig) -> list[str]:
    """Human-readable names for every observation entry, in vector order."""
    labels: list[str] = []
    for server in config.servers:
        for stat in _QSTAT_TAGS:
            for stage in _STAGE_TAGS:
                labels.append(f"server{server.id}.{stat}_{stage}")
        for tag in _BOUND_TAGS:
            labels.append(f"server{server.id}.{tag}")
    return labels


def routing_phi(config: SimulationConfig, server, omega_col) -> PhiTriple:
    """Per-stage drifts for one server under a routing column.

    A server receiving no traffic is evaluated at the unweighted mean size
    of the services it supports (the zero-load limit), keeping the drifts
    finite and informative instead of degenerate.
    """
    lam = config.lambda_vector()
    agg = aggregate_arrival_rate(lam, omega_col)
    if agg <= 0.0:
        supported = [
            svc.mean_size for svc in config.services if svc.id in server.supported
        ]
        cbar = float(np.mean(supported))
    else:
        cbar = mean_task_size(lam, config.sizes_vector(), omega_col)
    mu = service_rates(server, cbar)
    return PhiTriple.from_rates(*mu, agg)


def server_bound(
    config: SimulationConfig, server, omega_col, gamma: float
) -> BoundEvaluation:
    """Tail-bound evaluation for one server under a routing column."""
    return evaluate_bound(routing_phi(config, server, omega_col), gamma)


@dataclass(frozen=True)
class StepWindow:
    """Audit record for one decision window.

    ``credited_ids`` are the requests whose outcome entered this window's
    reward; ``deferred_ids`` are still awaiting an outcome; ``leftover_ids``
    (final window only) were charged as tail events without ever resolving.
    ``epsilon`` maps server id to the per-stage positive queue growth over
    the window.
    """

    index: int
    t_start: float
    t_end: float
    credited_ids: tuple[int, ...]
    deferred_ids: tuple[int, ...]
    leftover_ids: tuple[int, ...]
    epsilon: dict[int, tuple[int, int, int]]
    reward: float


class Environment:
    """Episodic window-stepped control interface to the simulator.

    Parameters
    ----------
    config : cluster / workload / reward configuration.  The episode horizon
        is ``steps_per_episode * delta_ms`` regardless of the configured
        simulation horizon (traces are drawn to cover exactly the episode).
    trace_provider : optional override mapping a composite seed to a
        :class:`RequestTrace`; defaults to the standard workload generator.
        Tests use this to replay hand-built traces.
    """

    def __init__(
        self,
        config: SimulationConfig,
        trace_provider: Callable[[tuple[int, int]], RequestTrace] | None = None,
    ):
        self.config = config
        self.catalog: PlanCatalog = build_catalog(config)
        episode_horizon = config.step.delta_ms * config.step.steps_per_episode
        if config.sim.horizon_ms != episode_horizon:
            self._episode_config = config.with_updates(horizon_ms=episode_horizon)
        else:
            self._episode_config = config
        self._trace_provider = trace_provider or (
            lambda seed: generate_workload(self._episode_config, seed=seed)
        )
        self._episode_counts: dict[int, int] = {}
        self._sim: Simulator | None = None
        self._done = True
        self.step_windows: list[StepWindow] = []
        self.snapshot_log: list = []

    # -- public geometry ----------------------------------------------------

    @property
    def num_servers(self) -> int:
        return self.config.num_servers

    @property
    def num_services(self) -> int:
        return self.config.num_services

    @property
    def observation_size(self) -> int:
        return FEATURES_PER_SERVER * self.config.num_servers

    def plan_counts(self) -> list[int]:
        return self.catalog.plan_counts()

    @property
    def request_records(self):
        if self._sim is None:
            raise RuntimeError("environment not reset")
        return self._sim.records

    # -- episode control ----------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Start a fresh episode; returns the initial observation.

        Reusing a seed draws a new trace: the trace stream is derived from
        (seed, episode counter for that seed), so repeated resets explore
        fresh workloads while a fresh environment replays episode 0 exactly.
        """
        if seed is None:
            seed = self.config.seed
        seed = int(seed)
        episode = self._episode_counts.get(seed, 0)
        self._episode_counts[seed] = episode + 1
        composite = (seed, episode)

        trace = self._trace_provider(composite)
        self._scheduler = ProbabilisticScheduler(
            self.catalog, uniform_policy(self.catalog), seed=composite
        )
        self._policy: PolicyMatrix = self._scheduler.policy
        self._sim = Simulator(self._episode_config, trace, self._scheduler, seed=composite)
        self._window = 0
        self._done = False
        self._deferred: list = []
        self._next_record = 0
        self._boundary = self._sim.take_snapshot()
        self.snapshot_log = list(self._boundary)
        self.step_windows = []

        qstats = np.zeros((4, self.num_servers, 3))
        return self._assemble_state(qstats, self._server_evaluations(self._policy))

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        """Install ``action`` (per-service plan distributions), run one window.

        Returns ``(state, reward, done, info)`` with info keys
        ``window_index``, ``credited``, ``deferred`` and ``kappa_bound``.
        """
        if self._sim is None:
            raise RuntimeError("environment not reset; call reset() first")
        if self._done:
            raise RuntimeError("episode is done; call reset() before stepping")

        distributions = self._normalize_action(action)
        self._scheduler.set_distributions(distributions)
        self._policy = self._scheduler.policy

        cfg = self.config
        delta = cfg.step.delta_ms
        index = self._window
        t_start = index * delta
        t_end = t_start + delta

        m = self.num_servers
        counts = np.empty((SAMPLES_PER_WINDOW + 1, m, 3), dtype=np.int64)
        for j, snap in enumerate(self._boundary):
            counts[0, j] = (snap.q_up, snap.q_srv, snap.q_down)
        last = self._boundary
        for k in range(1, SAMPLES_PER_WINDOW + 1):
            self._sim.advance_to(t_start + k * delta / SAMPLES_PER_WINDOW)
            last = self._sim.take_snapshot()
            for j, snap in enumerate(last):
                counts[k, j] = (snap.q_up, snap.q_srv, snap.q_down)
            self.snapshot_log.extend(last)
        self._boundary = last

        growth = np.maximum(counts[-1] - counts[0], 0)
        epsilon = {
            server.id: tuple(int(g) for g in growth[j])
            for j, server in enumerate(cfg.servers)
        }

        def eps_bar(plan: tuple[int, ...]) -> float:
            return sum(sum(epsilon[j]) for j in plan) / len(plan)

        gamma = cfg.reward.gamma
        b1, b2, b3 = cfg.reward.beta1, cfg.reward.beta2, cfg.reward.beta3
        records = self._sim.records
        fresh = records[self._next_record :]
        self._next_record = len(records)

        reward = 0.0
        credited: list[int] = []
        deferred: list = []
        for rec in self._deferred + fresh:
            if rec.departure_ms <= t_end:
                tail = rec.latency_ms >= gamma
            elif t_end - rec.arrival_ms >= gamma:
                tail = True  # still in flight, outcome already certain
            else:
                deferred.append(rec)
                continue
            credited.append(rec.id)
            reward += (-b2 if tail else b1) - b3 * eps_bar(rec.plan)

        done = index + 1 >= cfg.step.steps_per_episode
        leftover_ids: tuple[int, ...] = ()
        if done:
            for rec in deferred:
                reward += -b2 - b3 * eps_bar(rec.plan)
            leftover_ids = tuple(rec.id for rec in deferred)
            deferred = []
        self._deferred = deferred
        self._window = index + 1
        self._done = done

        evaluations = self._server_evaluations(self._policy)
        kappa = system_tail_bound([ev.eta_star for ev in evaluations]).kappa_bound

        qstats = np.stack(
            [
                counts.max(axis=0),
                counts.min(axis=0),
                counts.mean(axis=0),
                counts.var(axis=0),
            ]
        )
        state = self._assemble_state(qstats, evaluations)
        info = {
            "window_index": index,
            "credited": len(credited),
            "deferred": len(self._deferred),
            "kappa_bound": kappa,
        }
        self.step_windows.append(
            StepWindow(
                index=index,
                t_start=t_start,
                t_end=t_end,
                credited_ids=tuple(credited),
                deferred_ids=tuple(rec.id for rec in self._deferred),
                leftover_ids=leftover_ids,
                epsilon=epsilon,
                reward=float(reward),
            )
        )
        return state, float(reward), done, info

    # -- internals ------------------------------------------------------------

    def _normalize_action(self, action) -> dict[int, Sequence[float]]:
        sids = self.catalog.service_ids
        if isinstance(action, Mapping):
            known = {sid for sid in sids} | {str(sid) for sid in sids}
            unknown = [str(k) for k in action.keys() if k not in known]
            if unknown:
                raise ValueError(f"action has unknown service keys: {sorted(unknown)}")
            out = {}
            for sid in sids:
                if sid in action:
                    out[sid] = action[sid]
                elif str(sid) in action:
                    out[sid] = action[str(sid)]
                else:
                    raise ValueError(f"action missing distribution for service {sid}")
            return out
        rows = list(action)
        if len(rows) != len(sids):
            raise ValueError(
                f"action length {len(rows)} != number of services {len(sids)}"
            )
        return dict(zip(sids, rows))

    def _server_evaluations(self, policy: PolicyMatrix) -> list[BoundEvaluation]:
        """Per-server tail-bound evaluations under a routing matrix."""
        cfg = self.config
        return [
            server_bound(cfg, server, policy.omega_column(server.id), cfg.reward.gamma)
            for server in cfg.servers
        ]

    def _assemble_state(
        self, qstats: np.ndarray, evaluations: list[BoundEvaluation]
    ) -> np.ndarray:
        state = np.empty(self.observation_size)
        for j in range(self.num_servers):
            base = FEATURES_PER_SERVER * j
            for s in range(4):  # max, min, ave, var
                state[base + 3 * s : base + 3 * s + 3] = qstats[s, j]
            state[base + 12 : base + 18] = evaluations[j].features()
        return state
