"""Closed-form queueing analytics for three-stage tandem servers.

A request routed to a server traverses an uplink queue, a compute queue and a
downlink queue, each modeled as M/M/1.  With per-stage drifts
``phi_k = mu_k - Lambda`` (service rate minus aggregate arrival rate), the
sojourn time T of a sub-task has moment-generating function

    T_hat(x) = prod_k phi_k / (phi_k - x),      0 <= x < min(phi),

and the Chernoff bound on the tail is

    P(T > gamma) <= eta(x) = T_hat(x) * exp(-x * gamma)

for any feasible exponent x.  ``minimize_eta`` finds the optimal exponent by
bisecting the strictly increasing first-order condition S1(x) = gamma, where
S1 = sum_k 1/(phi_k - x).  Independent per-server bounds combine into a
system-level bound via the complement rule (``system_tail_bound``).

All calls are pure functions of their arguments and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "DomainError",
    "InstabilityError",
    "PhiTriple",
    "BoundEvaluation",
    "SystemBound",
    "aggregate_arrival_rate",
    "mean_task_size",
    "service_rates",
    "mgf_response",
    "chernoff_eta",
    "minimize_eta",
    "evaluate_bound",
    "system_tail_bound",
]

#: Guard keeping the bisection bracket strictly below the MGF pole at min(phi).
_POLE_MARGIN = 1.0 - 1e-12

_BISECT_MAX_ITER = 200


class InstabilityError(ValueError):
    """Raised when a stage drift is non-positive (queue not stable)."""


class DomainError(ValueError):
    """Raised when the Chernoff exponent leaves [0, min phi)."""


@dataclass(frozen=True)
class PhiTriple:
    """Per-stage drifts (requests/ms) in fixed (uplink, server, downlink) order."""

    phi_u: float
    phi_s: float
    phi_d: float

    @classmethod
    def from_rates(cls, mu_u: float, mu_s: float, mu_d: float, arrival_rate: float) -> "PhiTriple":
        """Build drifts from stage service rates and the aggregate arrival rate."""
        return cls(mu_u - arrival_rate, mu_s - arrival_rate, mu_d - arrival_rate)

    @property
    def stable(self) -> bool:
        return self.phi_u > 0.0 and self.phi_s > 0.0 and self.phi_d > 0.0

    @property
    def min_phi(self) -> float:
        return min(self.phi_u, self.phi_s, self.phi_d)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.phi_u, self.phi_s, self.phi_d)


@dataclass(frozen=True)
class BoundEvaluation:
    """Bound and derivative values at one exponent.

    ``minimize_eta`` returns the evaluation at the optimizer, so ``x`` equals
    ``x_star`` there.  When the bound is vacuous (no useful exponent exists)
    ``eta_star`` is 1, the derivative fields are zeroed, and ``features``
    yields the sentinel vector (1, 0, 0, 0, 0, 0).
    """

    x: float
    mgf: float
    mgf_grad: float
    mgf_hess: float
    eta: float
    eta_grad: float
    eta_hess: float
    x_star: float
    eta_star: float
    vacuous: bool

    def features(self) -> tuple[float, float, float, float, float, float]:
        """Fixed-order feature tuple (eta*, eta', eta'', T, T', T'')."""
        if self.vacuous:
            return (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        return (
            self.eta_star,
            self.eta_grad,
            self.eta_hess,
            self.mgf,
            self.mgf_grad,
            self.mgf_hess,
        )


_VACUOUS = BoundEvaluation(
    x=0.0,
    mgf=1.0,
    mgf_grad=0.0,
    mgf_hess=0.0,
    eta=1.0,
    eta_grad=0.0,
    eta_hess=0.0,
    x_star=0.0,
    eta_star=1.0,
    vacuous=True,
)


@dataclass(frozen=True)
class SystemBound:
    """Per-server tail bounds and the combined system bound."""

    per_server: list[float]
    kappa_bound: float


def aggregate_arrival_rate(lambdas: Sequence[float], omega_col: Sequence[float]) -> float:
    """Aggregate Poisson rate reaching one server: Lambda_j = sum_i lambda_i * omega_ij.

    Poisson splitting guarantees the merged stream is again Poisson with this
    rate, so the result feeds the M/M/1 drift computation directly.
    """
    if len(lambdas) != len(omega_col):
        raise ValueError(
            f"length mismatch: {len(lambdas)} rates vs {len(omega_col)} routing entries"
        )
    return float(sum(lam * w for lam, w in zip(lambdas, omega_col)))


def mean_task_size(
    lambdas: Sequence[float], sizes: Sequence[float], omega_col: Sequence[float]
) -> float:
    """Traffic-weighted mean task size (cycles) seen by one server.

    c_bar = sum_i c_i * lambda_i * omega_i / sum_i lambda_i * omega_i.  Raises
    when the denominator vanishes ("no traffic") so callers never divide by
    zero silently.
    """
    if not (len(lambdas) == len(sizes) == len(omega_col)):
        raise ValueError("length mismatch between rates, sizes and routing entries")
    weight = sum(lam * w for lam, w in zip(lambdas, omega_col))
    if weight <= 0.0:
        raise ValueError("no traffic routed to this server (zero aggregate rate)")
    total = sum(c * lam * w for c, lam, w in zip(sizes, lambdas, omega_col))
    return float(total / weight)


def service_rates(server, mean_size: float) -> tuple[float, float, float]:
    """Per-stage service rates in requests/ms: mu = r / c_bar.

    ``server`` is any object exposing stage rates ``r_u``, ``r_s``, ``r_d``
    in cycles/ms; ``mean_size`` is the mean task size in cycles.
    """
    if mean_size <= 0.0:
        raise ValueError("mean_size must be positive")
    return (server.r_u / mean_size, server.r_s / mean_size, server.r_d / mean_size)


def _check_domain(phi: PhiTriple, x: float) -> None:
    if not phi.stable:
        raise InstabilityError(f"unstable drifts {phi.as_tuple()}: all must be > 0")
    if x < 0.0 or x >= phi.min_phi:
        raise DomainError(
            f"exponent x={x} outside feasible domain [0, {phi.min_phi})"
        )


def mgf_response(phi: PhiTriple, x: float) -> tuple[float, float, float]:
    """MGF of the tandem sojourn and its first two derivatives at ``x``.

    Returns ``(T, T', T'')`` with T = prod phi/(phi-x), T' = T*S1 and
    T'' = T*(S1^2 + S2), where S1 = sum 1/(phi-x) and S2 = sum 1/(phi-x)^2.
    """
    _check_domain(phi, x)
    value = 1.0
    s1 = 0.0
    s2 = 0.0
    for p in phi.as_tuple():
        gap = p - x
        value *= p / gap
        inv = 1.0 / gap
        s1 += inv
        s2 += inv * inv
    return (value, value * s1, value * (s1 * s1 + s2))


def chernoff_eta(phi: PhiTriple, gamma: float, x: float) -> tuple[float, float, float]:
    """Chernoff tail bound eta(x) = T(x) e^{-x gamma} with derivatives.

    eta'  = e^{-x gamma} (T' - gamma T)
    eta'' = e^{-x gamma} (gamma^2 T - 2 gamma T' + T'')
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    mgf, mgf_grad, mgf_hess = mgf_response(phi, x)
    damp = math.exp(-x * gamma)
    eta = mgf * damp
    eta_grad = damp * (mgf_grad - gamma * mgf)
    eta_hess = damp * (gamma * gamma * mgf - 2.0 * gamma * mgf_grad + mgf_hess)
    return (eta, eta_grad, eta_hess)


def _s1(phi: PhiTriple, x: float) -> float:
    return (
        1.0 / (phi.phi_u - x)
        + 1.0 / (phi.phi_s - x)
        + 1.0 / (phi.phi_d - x)
    )


def minimize_eta(phi: PhiTriple, gamma: float, tol: float = 1e-10) -> BoundEvaluation:
    """Minimize the Chernoff bound over the feasible exponent domain.

    eta'(x) = 0 is equivalent to S1(x) = gamma, and S1 is strictly increasing
    on (0, min phi), so the stationary point is found by bisection — Newton
    steps are avoided because the pole at min(phi) makes them fragile.  When
    S1(0) >= gamma there is no interior root and the bound is vacuous
    (eta* = 1 at x* = 0).
    """
    if not phi.stable:
        raise InstabilityError(f"unstable drifts {phi.as_tuple()}: all must be > 0")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if _s1(phi, 0.0) >= gamma:
        return _VACUOUS

    lo = 0.0
    hi = phi.min_phi * _POLE_MARGIN
    if _s1(phi, hi) < gamma:
        # gamma beyond the resolvable bracket: the optimum hugs the pole.
        x_root = hi
    else:
        x_root = 0.5 * hi
        for _ in range(_BISECT_MAX_ITER):
            s = _s1(phi, x_root)
            if abs(s - gamma) <= tol * gamma:
                break
            if s < gamma:
                lo = x_root
            else:
                hi = x_root
            x_root = 0.5 * (lo + hi)

    mgf, mgf_grad, mgf_hess = mgf_response(phi, x_root)
    eta, eta_grad, eta_hess = chernoff_eta(phi, gamma, x_root)
    if eta_hess < 0.0 or (eta_hess == 0.0 and eta > 0.0):
        # eta'' > 0 holds analytically; equality can only mean the exp(-x*gamma)
        # factor underflowed, in which case the bound itself is already 0.
        raise ArithmeticError(
            f"convexity certificate failed at x*={x_root}: eta''={eta_hess}"
        )
    return BoundEvaluation(
        x=x_root,
        mgf=mgf,
        mgf_grad=mgf_grad,
        mgf_hess=mgf_hess,
        eta=eta,
        eta_grad=eta_grad,
        eta_hess=eta_hess,
        x_star=x_root,
        eta_star=min(eta, 1.0),
        vacuous=False,
    )


def evaluate_bound(phi: PhiTriple, gamma: float, tol: float = 1e-10) -> BoundEvaluation:
    """Like :func:`minimize_eta` but degrades gracefully under overload.

    Unstable drifts yield the vacuous sentinel instead of raising, which is
    what state-feature assembly needs when a policy overloads a server.
    """
    if not phi.stable:
        return _VACUOUS
    return minimize_eta(phi, gamma, tol)


def system_tail_bound(etas: Iterable[float]) -> SystemBound:
    """System-level tail bound from independent per-server bounds.

    kappa_bound = 1 - prod_j (1 - min(eta_j, 1)): the complement rule for the
    event that at least one server's sub-task exceeds the threshold.
    """
    per_server = [float(e) for e in etas]
    if not per_server:
        raise ValueError("need at least one per-server bound")
    if any(e < 0.0 for e in per_server):
        raise ValueError("tail bounds must be non-negative")
    survival = 1.0
    for eta in per_server:
        survival *= 1.0 - min(eta, 1.0)
    return SystemBound(per_server=per_server, kappa_bound=1.0 - survival)
