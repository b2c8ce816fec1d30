"""tailsim: tail-latency analysis and simulation for parallelized dispatch.

The package models a cluster of edge servers, each a three-stage tandem queue
(uplink -> compute -> downlink).  Requests may be split across a *plan* (a
subset of supporting servers) and complete when the slowest sub-task finishes,
which amplifies tail latency.  The library provides:

* closed-form Chernoff tail bounds with derivatives (:mod:`tailsim.analytics`)
* a deterministic discrete-event simulator (:mod:`tailsim.simulation`)
* baseline schedulers and the plan-distribution-to-routing map
  (:mod:`tailsim.schedulers`)
* a windowed learning environment with an HTTP gateway
  (:mod:`tailsim.environment`, :mod:`tailsim.gateway`)
* percentile/CDF reporting (:mod:`tailsim.metrics`)

Quick start::

    from tailsim import analytics

    phi = analytics.PhiTriple(0.05, 0.10, 0.07)
    bound = analytics.minimize_eta(phi, gamma=120.0)
    print(bound.x_star, bound.eta_star)

The HTTP gateway and CLI live in :mod:`tailsim.gateway` and
:mod:`tailsim.cli`; both are imported lazily so that library use never pays
the web-framework import cost.
"""

from tailsim.analytics import (
    BoundEvaluation,
    PhiTriple,
    SystemBound,
    aggregate_arrival_rate,
    chernoff_eta,
    evaluate_bound,
    mean_task_size,
    mgf_response,
    minimize_eta,
    service_rates,
    system_tail_bound,
)
from tailsim.config import (
    SimulationConfig,
    build_catalog,
    load_config,
    parse_config,
    subset_config,
)
from tailsim.environment import Environment, StepWindow, state_labels
from tailsim.metrics import summarize_latencies
from tailsim.schedulers import make_scheduler, policy_to_omega, uniform_policy
from tailsim.simulation import Simulator, run
from tailsim.workload import RequestTrace, generate_workload

__version__ = "0.1.0"

__all__ = [
    "BoundEvaluation",
    "PhiTriple",
    "SystemBound",
    "aggregate_arrival_rate",
    "chernoff_eta",
    "evaluate_bound",
    "mean_task_size",
    "mgf_response",
    "minimize_eta",
    "service_rates",
    "system_tail_bound",
    "SimulationConfig",
    "build_catalog",
    "load_config",
    "parse_config",
    "subset_config",
    "Environment",
    "StepWindow",
    "state_labels",
    "summarize_latencies",
    "make_scheduler",
    "policy_to_omega",
    "uniform_policy",
    "Simulator",
    "run",
    "RequestTrace",
    "generate_workload",
    "__version__",
]
