"""Discrete-event simulation of parallel fan-out over three-stage tandem queues.

Every server is an uplink→server→downlink chain of FCFS queues.  A request
arrives, a scheduler picks a plan (a set of servers), the task is split
evenly into one sub-task per member, each sub-task traverses its server's
three stages, and the request departs when its slowest sub-task finishes
(max-join, no synchronization cost).

Two service-time modes:

* ``analytic`` — every stage visit draws an independent exponential with
  mean work/rate, so each stage is exactly the memoryless single-server
  queue that the closed-form tail analytics assume;
* ``coupled`` — every stage takes deterministically work/rate; one sampled
  size drives all three stages, the realistic regime for benchmarking.

Determinism: the event loop is totally ordered by (time, insertion sequence),
arrivals win ties against completions, and analytic-mode draws come from a
single seed-derived stream consumed in event order.  Identical (config,
trace, scheduler, seed) reproduce identical results bit for bit.

Queues are unbounded and there is no preemption.  In batch runs, after the
last arrival the system drains for at most ``DRAIN_WINDOWS`` step windows;
whatever is still in flight at the cap is recorded with latency +inf and
counts as a tail event.
"""

from __future__ import annotations

import math
from collections import deque
from heapq import heappop, heappush
from typing import NamedTuple

import numpy as np

from .config import SimulationConfig, build_catalog
from .schedulers import ServerLoad, make_scheduler
from .workload import RequestTrace, seed_entropy

__all__ = [
    "DRAIN_WINDOWS",
    "QueueSnapshot",
    "StageEvent",
    "RequestRecord",
    "SimulationProtocolError",
    "SimulationResult",
    "Simulator",
    "run",
    "stage_duration",
]

DRAIN_WINDOWS = 10

_INF = math.inf
_SIM_STREAM = 0x51301A
_POOL_SIZE = 1 << 16

STAGE_NAMES = ("uplink", "server", "downlink")


class SimulationProtocolError(RuntimeError):
    """A scheduler handed back a plan the configuration does not allow."""


class QueueSnapshot(NamedTuple):
    """Instantaneous queue lengths (tasks) and backlogs (cycles) of one server."""

    t_ms: float
    server_id: int
    q_up: int
    q_srv: int
    q_down: int
    backlog_up: float
    backlog_srv: float
    backlog_down: float


class StageEvent(NamedTuple):
    """One completed stage visit (recorded only when stage times are kept)."""

    request_id: int
    server_id: int
    stage: int
    enqueue_ms: float
    start_ms: float
    finish_ms: float
    work: float


class RequestRecord:
    """Outcome of one request; latency is +inf until the max-join completes."""

    __slots__ = (
        "id",
        "service_id",
        "arrival_ms",
        "size",
        "plan",
        "departure_ms",
        "latency_ms",
        "remaining",
        "_max_finish",
    )

    def __init__(self, req_id: int, service_id: int, arrival_ms: float, size: float, plan):
        self.id = req_id
        self.service_id = service_id
        self.arrival_ms = arrival_ms
        self.size = size
        self.plan = plan
        self.departure_ms = _INF
        self.latency_ms = _INF
        self.remaining = len(plan)
        self._max_finish = -_INF

    def __repr__(self) -> str:  # debugging aid only
        return (
            f"RequestRecord(id={self.id}, service={self.service_id}, "
            f"arrival={self.arrival_ms}, latency={self.latency_ms})"
        )


class _SubTask:
    __slots__ = ("record", "work", "enqueue_ms", "start_ms")

    def __init__(self, record: RequestRecord, work: float):
        self.record = record
        self.work = work
        self.enqueue_ms = 0.0
        self.start_ms = 0.0


class SimulationResult(NamedTuple):
    records: list[RequestRecord]
    snapshots: list[QueueSnapshot]
    arrivals: int
    completed: int
    end_time: float
    stage_events: list[StageEvent]


def stage_duration(work: float, rate: float, mode: str, rng) -> float:
    """Service duration of one stage visit, in ms.

    coupled: deterministically work/rate.  analytic: exponential with that
    mean, drawn from ``rng``.
    """
    mean = work / rate
    if mode == "coupled":
        return mean
    if mode == "analytic":
        return float(rng.exponential(mean))
    raise ValueError(f"unknown mode: {mode!r}")


class Simulator:
    """Incremental event-driven simulation, advanced to arbitrary times.

    The three stages of server ``j`` live at slots ``3*(j-1) .. 3*(j-1)+2``
    of the flat per-stage state arrays.  A single completion event can be
    outstanding per slot (the stage is busy exactly when ``_cur[slot]`` is a
    sub-task), so no stale events ever sit in the heap.
    """

    def __init__(
        self,
        config: SimulationConfig,
        trace: RequestTrace,
        scheduler,
        seed: int | tuple[int, ...] | None = None,
        record_stage_times: bool = False,
    ):
        self.config = config
        self.scheduler = scheduler
        self._record_times = record_stage_times
        self.stage_events: list[StageEvent] = []

        self._times = trace.times.tolist()
        self._svc = trace.service_ids.tolist()
        self._sizes = trace.sizes.tolist()
        self._n = len(self._times)
        self._ptr = 0

        self._server_ids = [s.id for s in config.servers]
        self._rates: list[float] = []
        for s in config.servers:
            self._rates.extend(s.stage_rates())
        n_slots = 3 * len(config.servers)
        self._waiting: list[deque] = [deque() for _ in range(n_slots)]
        self._waiting_work = [0.0] * n_slots
        self._cur: list[_SubTask | None] = [None] * n_slots
        self._cur_start = [0.0] * n_slots
        self._cur_finish = [0.0] * n_slots

        self._supporters = {
            svc.id: frozenset(s.id for s in config.servers if svc.id in s.supported)
            for svc in config.services
        }
        self._plan_ok: set[tuple[int, tuple[int, ...]]] = set()

        self._heap: list[tuple[float, int, int]] = []
        self._seq = 0
        self.clock = 0.0
        self._last_event_time = 0.0

        self.records: list[RequestRecord] = []
        self.arrivals_processed = 0
        self.completed = 0

        self._analytic = config.sim.mode == "analytic"
        if seed is None:
            seed = config.seed
        self._rng = np.random.default_rng([*seed_entropy(seed), _SIM_STREAM])
        self._pool: list[float] = []
        self._pool_i = 0

    # -- internal mechanics -------------------------------------------------

    def _next_exp(self) -> float:
        i = self._pool_i
        if i >= len(self._pool):
            self._pool = self._rng.exponential(1.0, size=_POOL_SIZE).tolist()
            i = 0
        self._pool_i = i + 1
        return self._pool[i]

    def _start_service(self, slot: int, task: _SubTask, t: float) -> None:
        duration = task.work / self._rates[slot]
        if self._analytic:
            duration *= self._next_exp()
        finish = t + duration
        self._cur[slot] = task
        self._cur_start[slot] = t
        self._cur_finish[slot] = finish
        if self._record_times:
            task.start_ms = t
        self._seq += 1
        heappush(self._heap, (finish, self._seq, slot))

    def _enqueue(self, slot: int, task: _SubTask, t: float) -> None:
        if self._record_times:
            task.enqueue_ms = t
        if self._cur[slot] is None:
            self._start_service(slot, task, t)
        else:
            self._waiting[slot].append(task)
            self._waiting_work[slot] += task.work

    def _validate_plan(self, service_id: int, plan) -> tuple[int, ...]:
        if not isinstance(plan, tuple):
            plan = tuple(plan)
        key = (service_id, plan)
        if key in self._plan_ok:
            return plan
        if not plan:
            raise SimulationProtocolError(f"empty plan for service {service_id}")
        supporters = self._supporters.get(service_id)
        if supporters is None:
            raise SimulationProtocolError(f"unknown service {service_id}")
        for j in plan:
            if j not in supporters:
                raise SimulationProtocolError(
                    f"server {j} does not support service {service_id}"
                )
        if len(set(plan)) != len(plan):
            raise SimulationProtocolError(f"duplicate servers in plan {plan}")
        self._plan_ok.add(key)
        return plan

    def _process_arrival(self, t: float) -> None:
        i = self._ptr
        self._ptr = i + 1
        service_id = self._svc[i]
        size = self._sizes[i]
        loads = self.loads() if self.scheduler.needs_loads else None
        plan = self._validate_plan(service_id, self.scheduler.choose(service_id, size, loads))
        record = RequestRecord(i, service_id, t, size, plan)
        self.records.append(record)
        self.arrivals_processed += 1
        share = size / len(plan)
        for j in plan:
            slot = 3 * (j - 1)
            self._enqueue(slot, _SubTask(record, share), t)

    def _process_completion(self, t: float, slot: int) -> None:
        task = self._cur[slot]
        self._cur[slot] = None
        if self._record_times:
            self.stage_events.append(
                StageEvent(
                    request_id=task.record.id,
                    server_id=slot // 3 + 1,
                    stage=slot % 3,
                    enqueue_ms=task.enqueue_ms,
                    start_ms=task.start_ms,
                    finish_ms=t,
                    work=task.work,
                )
            )
        waiting = self._waiting[slot]
        if waiting:
            nxt = waiting.popleft()
            self._waiting_work[slot] -= nxt.work
            self._start_service(slot, nxt, t)
        stage = slot % 3
        if stage < 2:
            self._enqueue(slot + 1, task, t)
            return
        record = task.record
        if t > record._max_finish:
            record._max_finish = t
        record.remaining -= 1
        if record.remaining == 0:
            record.departure_ms = record._max_finish
            record.latency_ms = record._max_finish - record.arrival_ms
            self.completed += 1

    # -- public stepping API -------------------------------------------------

    def advance_to(self, t: float, stop_when_idle: bool = False) -> bool:
        """Process every event with timestamp ≤ t; the clock lands on t.

        With ``stop_when_idle`` the clock stops at the last processed event
        once both the trace and the event heap are exhausted (drain mode);
        returns True in that case.
        """
        if t < self.clock:
            raise ValueError(
                f"cannot advance backwards to {t} (monotone clock at {self.clock})"
            )
        heap = self._heap
        times = self._times
        n = self._n
        while True:
            t_ev = heap[0][0] if heap else _INF
            t_arr = times[self._ptr] if self._ptr < n else _INF
            if t_arr <= t_ev:
                if t_arr > t:
                    break
                self._last_event_time = t_arr
                self._process_arrival(t_arr)
            else:
                if t_ev > t:
                    break
                ev = heappop(heap)
                self._last_event_time = t_ev
                self._process_completion(ev[0], ev[2])
        idle = self._ptr >= n and not heap
        if stop_when_idle and idle:
            self.clock = max(self.clock, self._last_event_time)
            return True
        self.clock = t
        return False

    def snapshot_at(self, t: float) -> list[QueueSnapshot]:
        """Queue state at time t; valid on the quiescent interval
        [last processed event, clock]."""
        if t > self.clock:
            raise ValueError(f"snapshot time {t} is in the future (clock {self.clock})")
        if t < self._last_event_time:
            raise ValueError(
                f"snapshot time {t} predates the last processed event "
                f"({self._last_event_time}); state no longer available"
            )
        out = []
        for j_idx, server_id in enumerate(self._server_ids):
            lengths = [0, 0, 0]
            backlogs = [0.0, 0.0, 0.0]
            for st in range(3):
                slot = 3 * j_idx + st
                lengths[st] = len(self._waiting[slot])
                backlogs[st] = self._waiting_work[slot]
                task = self._cur[slot]
                if task is not None:
                    lengths[st] += 1
                    span = self._cur_finish[slot] - self._cur_start[slot]
                    if span > 0.0:
                        backlogs[st] += task.work * (self._cur_finish[slot] - t) / span
            out.append(
                QueueSnapshot(
                    t_ms=t,
                    server_id=server_id,
                    q_up=lengths[0],
                    q_srv=lengths[1],
                    q_down=lengths[2],
                    backlog_up=backlogs[0],
                    backlog_srv=backlogs[1],
                    backlog_down=backlogs[2],
                )
            )
        return out

    def take_snapshot(self) -> list[QueueSnapshot]:
        return self.snapshot_at(self.clock)

    def loads(self) -> dict[int, ServerLoad]:
        """Current per-server stage backlogs and rates (delay-aware input)."""
        t = self._last_event_time
        out = {}
        for j_idx, server_id in enumerate(self._server_ids):
            backlogs = [0.0, 0.0, 0.0]
            for st in range(3):
                slot = 3 * j_idx + st
                backlogs[st] = self._waiting_work[slot]
                task = self._cur[slot]
                if task is not None:
                    span = self._cur_finish[slot] - self._cur_start[slot]
                    if span > 0.0:
                        backlogs[st] += task.work * (self._cur_finish[slot] - t) / span
            base = 3 * j_idx
            out[server_id] = ServerLoad(
                server_id=server_id,
                backlog=(backlogs[0], backlogs[1], backlogs[2]),
                rates=(self._rates[base], self._rates[base + 1], self._rates[base + 2]),
            )
        return out

    @property
    def in_flight(self) -> int:
        return self.arrivals_processed - self.completed


def run(
    config: SimulationConfig,
    trace: RequestTrace,
    scheduler,
    *,
    seed: int | None = None,
    snapshot_every_ms: float | None = None,
    record_stage_times: bool = False,
    policy=None,
) -> SimulationResult:
    """Run a full trace through the simulator and drain.

    ``scheduler`` may be a name (rd|gd|da|policy) or a scheduler object.
    Requests still unfinished at the drain cap (last arrival plus
    ``DRAIN_WINDOWS`` step windows) keep latency +inf.
    """
    if seed is None:
        seed = config.seed
    if isinstance(scheduler, str):
        scheduler = make_scheduler(scheduler, build_catalog(config), seed=seed, policy=policy)
    sim = Simulator(
        config, trace, scheduler, seed=seed, record_stage_times=record_stage_times
    )
    snapshots: list[QueueSnapshot] = []
    horizon = trace.horizon if trace.horizon > 0.0 else config.sim.horizon_ms

    if snapshot_every_ms is not None and snapshot_every_ms > 0.0:
        t = 0.0
        while t <= horizon + 1e-9:
            sim.advance_to(t)
            snapshots.extend(sim.take_snapshot())
            t += snapshot_every_ms
    else:
        sim.advance_to(horizon)

    last_arrival = trace.times[-1] if len(trace) else 0.0
    cap = float(last_arrival) + DRAIN_WINDOWS * config.step.delta_ms
    if cap > sim.clock:
        sim.advance_to(cap, stop_when_idle=True)

    return SimulationResult(
        records=sim.records,
        snapshots=snapshots,
        arrivals=sim.arrivals_processed,
        completed=sim.completed,
        end_time=sim.clock,
        stage_events=sim.stage_events,
    )
