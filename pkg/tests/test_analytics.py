"""Oracle tests for the closed-form tail analytics.

Derivative formulas are checked against central finite differences, the
minimizer against an independent bisection oracle written here (sharing no
code with the implementation), and hand-computed values are frozen as
literals.
"""

import math

import numpy as np
import pytest

from tailsim.analytics import (
    BoundEvaluation,
    DomainError,
    InstabilityError,
    PhiTriple,
    aggregate_arrival_rate,
    chernoff_eta,
    evaluate_bound,
    mean_task_size,
    mgf_response,
    minimize_eta,
    service_rates,
    system_tail_bound,
)


class _Server:
    """Minimal stand-in with the three stage-rate attributes."""

    def __init__(self, r_u, r_s, r_d):
        self.r_u = r_u
        self.r_s = r_s
        self.r_d = r_d


def _rel(a, b):
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


def _oracle_s1(phi, x):
    return sum(1.0 / (p - x) for p in phi)


def _oracle_eta(phi, gamma, x):
    mgf = 1.0
    for p in phi:
        mgf *= p / (p - x)
    return mgf * math.exp(-x * gamma)


def _oracle_bisect(phi, gamma, iters=400):
    """Independent root finder for S1(x) = gamma on (0, min phi)."""
    lo, hi = 0.0, min(phi) * (1.0 - 1e-12)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _oracle_s1(phi, mid) < gamma:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# rate aggregation and mixing
# ---------------------------------------------------------------------------

def test_aggregate_arrival_rate_hand_value():
    assert aggregate_arrival_rate([0.4, 0.5], [0.5, 0.2]) == pytest.approx(0.3, rel=1e-15)


def test_aggregate_arrival_rate_all_zero_routing():
    assert aggregate_arrival_rate([0.4, 0.5, 0.1], [0.0, 0.0, 0.0]) == 0.0


def test_aggregate_arrival_rate_one_hot_identity():
    assert aggregate_arrival_rate([0.4, 0.5], [0.0, 1.0]) == 0.5


def test_aggregate_arrival_rate_length_mismatch():
    with pytest.raises(ValueError):
        aggregate_arrival_rate([0.4, 0.5], [1.0])


def test_mean_task_size_degenerate_mixture():
    assert mean_task_size([0.4], [4.1e7], [1.0]) == 4.1e7


def test_mean_task_size_symmetric_mixture():
    assert mean_task_size([1.0, 1.0], [2.0, 4.0], [0.5, 0.5]) == pytest.approx(3.0, rel=1e-15)


def test_mean_task_size_weighted_mixture():
    assert mean_task_size([3.0, 1.0], [2.0, 4.0], [1.0, 1.0]) == pytest.approx(2.5, rel=1e-15)


def test_mean_task_size_no_traffic_error():
    with pytest.raises(ValueError, match="no traffic"):
        mean_task_size([1.0, 1.0], [2.0, 4.0], [0.0, 0.0])


def test_mean_task_size_bounded_by_supported_sizes():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = rng.integers(1, 6)
        lam = rng.uniform(0.1, 2.0, n)
        sizes = rng.uniform(1e6, 9e7, n)
        omega = rng.uniform(0.0, 1.0, n)
        omega[rng.integers(0, n)] = 1.0  # keep the mixture non-degenerate
        cbar = mean_task_size(lam, sizes, omega)
        active = omega > 0
        assert sizes[active].min() - 1e-6 <= cbar <= sizes[active].max() + 1e-6


def test_service_rates_table_arithmetic():
    mu_u, mu_s, mu_d = service_rates(_Server(5.4e6, 7.2e6, 5.4e6), 4.5e7)
    assert (mu_u, mu_s, mu_d) == (0.12, 0.16, 0.12)


def test_service_rates_hand_value():
    _, mu_s, _ = service_rates(_Server(8.0e6, 8.7e6, 8.0e6), 4.1e7)
    assert mu_s == pytest.approx(8.7e6 / 4.1e7, rel=1e-15)
    assert abs(mu_s - 0.21220) < 1e-5


def test_service_rates_ratio_identity():
    _, mu_s, _ = service_rates(_Server(3.0e6, 5.0e6, 3.0e6), 5.0e6)
    assert mu_s == 1.0


# ---------------------------------------------------------------------------
# MGF of the three-stage sojourn and its derivatives
# ---------------------------------------------------------------------------

def test_mgf_at_zero_is_one():
    rng = np.random.default_rng(11)
    for _ in range(100):
        phi = PhiTriple(*rng.uniform(0.01, 10.0, 3))
        value, grad, hess = mgf_response(phi, 0.0)
        assert abs(value - 1.0) <= 1e-14
        s1 = _oracle_s1((phi.phi_u, phi.phi_s, phi.phi_d), 0.0)
        s2 = sum(1.0 / p**2 for p in (phi.phi_u, phi.phi_s, phi.phi_d))
        assert grad == pytest.approx(s1, rel=1e-12)
        assert hess == pytest.approx(s1 * s1 + s2, rel=1e-12)


def test_mgf_hand_product():
    value, _, _ = mgf_response(PhiTriple(1.0, 2.0, 4.0), 0.5)
    # (1/0.5) * (2/1.5) * (4/3.5) = 64/21
    assert value == pytest.approx(64.0 / 21.0, rel=1e-12)
    assert value == pytest.approx(3.047619, rel=1e-6)


def test_mgf_positive_and_increasing_on_domain():
    phi = PhiTriple(0.35, 0.12, 0.9)
    xs = np.linspace(0.0, 0.12 * (1 - 1e-9), 500)
    values = [mgf_response(phi, x)[0] for x in xs]
    assert all(v >= 1.0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))
    assert all(mgf_response(phi, x)[1] > 0 for x in xs)
    assert all(mgf_response(phi, x)[2] > 0 for x in xs)


def test_mgf_gradient_matches_finite_difference():
    phi = PhiTriple(1.0, 2.0, 4.0)
    h = 1e-6
    up = mgf_response(phi, 0.5 + h)[0]
    dn = mgf_response(phi, 0.5 - h)[0]
    fd = (up - dn) / (2 * h)
    grad = mgf_response(phi, 0.5)[1]
    assert _rel(grad, fd) <= 1e-6


def test_mgf_hessian_matches_finite_difference_of_gradient():
    rng = np.random.default_rng(23)
    for _ in range(100):
        phi = PhiTriple(*rng.uniform(0.05, 5.0, 3))
        x = rng.uniform(0.0, 0.9) * phi.min_phi
        h = 1e-7 * max(phi.min_phi, 1.0)
        fd = (mgf_response(phi, x + h)[1] - mgf_response(phi, x - h)[1]) / (2 * h)
        assert _rel(mgf_response(phi, x)[2], fd) <= 1e-6


def test_mgf_symmetric_second_derivative_form():
    # S1^2 + S2 must equal the symmetric pair form to 1e-12 relative.
    rng = np.random.default_rng(31)
    for _ in range(300):
        phi = PhiTriple(*rng.uniform(0.02, 8.0, 3))
        x = rng.uniform(0.0, 0.97) * phi.min_phi
        value, _, hess = mgf_response(phi, x)
        yu = 1.0 / (phi.phi_u - x)
        ys = 1.0 / (phi.phi_s - x)
        yd = 1.0 / (phi.phi_d - x)
        symmetric = value * ((yu + ys) ** 2 + (ys + yd) ** 2 + (yu + yd) ** 2)
        assert _rel(hess, symmetric) <= 1e-12


def test_mgf_domain_error_at_and_beyond_pole():
    phi = PhiTriple(1.0, 2.0, 4.0)
    with pytest.raises(DomainError):
        mgf_response(phi, 1.0)
    with pytest.raises(DomainError):
        mgf_response(phi, 1.5)
    with pytest.raises(DomainError):
        mgf_response(phi, -0.1)


def test_mgf_instability_error():
    with pytest.raises(InstabilityError):
        mgf_response(PhiTriple(-0.1, 2.0, 4.0), 0.0)


def test_phi_triple_stability_flag():
    assert PhiTriple(0.1, 0.2, 0.3).stable
    assert not PhiTriple(0.1, -0.2, 0.3).stable
    assert PhiTriple(0.1, 0.2, 0.3).min_phi == 0.1
    assert not PhiTriple(0.1, 0.0, 0.3).stable


def test_phi_triple_from_rates_keeps_stage_identity():
    phi = PhiTriple.from_rates(0.10, 0.15, 0.12, 0.05)
    assert phi.phi_u == pytest.approx(0.05, rel=1e-12)
    assert phi.phi_s == pytest.approx(0.10, rel=1e-12)
    assert phi.phi_d == pytest.approx(0.07, rel=1e-12)


# ---------------------------------------------------------------------------
# Chernoff bound eta and its derivatives
# ---------------------------------------------------------------------------

def test_eta_at_zero_is_one():
    eta, _, _ = chernoff_eta(PhiTriple(0.3, 0.5, 0.7), 40.0, 0.0)
    assert eta == 1.0


def test_eta_hand_value():
    eta, _, _ = chernoff_eta(PhiTriple(1.0, 2.0, 4.0), 10.0, 0.5)
    assert eta == pytest.approx((64.0 / 21.0) * math.exp(-5.0), rel=1e-12)
    assert abs(eta - 0.020534) < 1e-6


def test_eta_gradient_and_hessian_match_finite_differences():
    rng = np.random.default_rng(37)
    for _ in range(100):
        phi = PhiTriple(*rng.uniform(0.05, 4.0, 3))
        x = rng.uniform(0.05, 0.9) * phi.min_phi
        gamma = rng.uniform(0.5, 2.0) * _oracle_s1(
            (phi.phi_u, phi.phi_s, phi.phi_d), 0.45 * phi.min_phi
        )
        h = 1e-7 * phi.min_phi
        eta, grad, hess = chernoff_eta(phi, gamma, x)
        fd_grad = (
            _oracle_eta((phi.phi_u, phi.phi_s, phi.phi_d), gamma, x + h)
            - _oracle_eta((phi.phi_u, phi.phi_s, phi.phi_d), gamma, x - h)
        ) / (2 * h)
        fd_hess = (
            chernoff_eta(phi, gamma, x + h)[1] - chernoff_eta(phi, gamma, x - h)[1]
        ) / (2 * h)
        assert _rel(grad, fd_grad) <= 1e-6
        assert _rel(hess, fd_hess) <= 1e-6


def test_eta_oracle_agreement_on_random_points():
    rng = np.random.default_rng(41)
    for _ in range(200):
        phi = PhiTriple(*rng.uniform(0.02, 6.0, 3))
        x = rng.uniform(0.0, 0.98) * phi.min_phi
        gamma = rng.uniform(1.0, 50.0)
        eta, _, _ = chernoff_eta(phi, gamma, x)
        assert eta == pytest.approx(
            _oracle_eta((phi.phi_u, phi.phi_s, phi.phi_d), gamma, x), rel=1e-12
        )


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------

def test_minimize_eta_against_independent_bisection():
    phi = PhiTriple(1.0, 2.0, 4.0)
    result = minimize_eta(phi, 4.0)
    x_oracle = _oracle_bisect((1.0, 2.0, 4.0), 4.0)
    assert not result.vacuous
    assert result.x_star == pytest.approx(x_oracle, abs=1e-8)
    assert result.eta_star == pytest.approx(
        _oracle_eta((1.0, 2.0, 4.0), 4.0, x_oracle), rel=1e-8
    )
    assert result.eta_star < 1.0
    for dx in (-0.01, 0.01):
        assert _oracle_eta((1.0, 2.0, 4.0), 4.0, result.x_star + dx) > result.eta_star


def test_minimize_eta_first_order_condition():
    rng = np.random.default_rng(43)
    for _ in range(50):
        phi = PhiTriple(*rng.uniform(0.05, 3.0, 3))
        s1_zero = _oracle_s1((phi.phi_u, phi.phi_s, phi.phi_d), 0.0)
        gamma = rng.uniform(1.3, 20.0) * s1_zero
        result = minimize_eta(phi, gamma)
        s1_at_root = _oracle_s1((phi.phi_u, phi.phi_s, phi.phi_d), result.x_star)
        assert abs(s1_at_root - gamma) <= 1e-10 * gamma
        assert result.eta_hess > 0.0
        assert 0.0 < result.x_star < phi.min_phi


def test_minimize_eta_vacuous_when_gamma_below_mean_proxy():
    # S1(0) = 1 + 1/2 + 1/4 = 1.75 > 1.5, so no interior stationary point.
    result = minimize_eta(PhiTriple(1.0, 2.0, 4.0), 1.5)
    assert result.vacuous
    assert result.eta_star == 1.0
    assert result.x_star == 0.0
    assert result.eta_grad == 0.0
    assert result.eta_hess == 0.0
    assert result.mgf_grad == 0.0
    assert result.mgf_hess == 0.0


def test_minimize_eta_instability_error():
    with pytest.raises(InstabilityError):
        minimize_eta(PhiTriple(0.0, 2.0, 4.0), 10.0)
    with pytest.raises(InstabilityError):
        minimize_eta(PhiTriple(1.0, -2.0, 4.0), 10.0)


def test_minimize_eta_grid_minimum():
    rng = np.random.default_rng(47)
    for _ in range(20):
        phi = PhiTriple(*rng.uniform(0.05, 3.0, 3))
        gamma = rng.uniform(1.5, 10.0) * _oracle_s1(
            (phi.phi_u, phi.phi_s, phi.phi_d), 0.0
        )
        result = minimize_eta(phi, gamma)
        grid = np.linspace(1e-9, phi.min_phi * (1 - 1e-9), 1000)
        etas = [
            _oracle_eta((phi.phi_u, phi.phi_s, phi.phi_d), gamma, x) for x in grid
        ]
        assert result.eta_star <= min(etas) + 1e-12


def test_minimize_eta_monotone_in_gamma():
    phi = PhiTriple(1.0, 2.0, 4.0)
    gammas = [2.0, 3.0, 5.0, 8.0, 15.0, 40.0, 1000.0]
    stars = [minimize_eta(phi, g).eta_star for g in gammas]
    for earlier, later in zip(stars, stars[1:]):
        assert earlier >= later
    # far-gamma probe: bound must decay at least as fast as a fixed exponent
    probe = minimize_eta(phi, 1000.0)
    x_probe = 0.9 * phi.min_phi
    cap = _oracle_eta((1.0, 2.0, 4.0), 1000.0, x_probe)
    assert probe.eta_star <= cap + 1e-300


def test_bound_evaluation_invariants():
    result = minimize_eta(PhiTriple(0.05, 0.10, 0.07), 120.0)
    assert isinstance(result, BoundEvaluation)
    assert 0.0 < result.x_star < 0.05
    assert result.mgf >= 1.0
    assert result.eta_star <= 1.0
    assert result.x == result.x_star
    # eta_star is the reported minimum over probes
    for x in np.linspace(1e-6, 0.05 * (1 - 1e-6), 200):
        eta, _, _ = chernoff_eta(PhiTriple(0.05, 0.10, 0.07), 120.0, x)
        assert result.eta_star <= eta + 1e-12


def test_evaluate_bound_sentinel_for_unstable_phi():
    result = evaluate_bound(PhiTriple(-0.02, 0.10, 0.07), 120.0)
    assert result.vacuous
    assert result.eta_star == 1.0
    assert list(result.features()) == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_evaluate_bound_matches_minimize_eta_when_stable():
    phi = PhiTriple(0.05, 0.10, 0.07)
    a = evaluate_bound(phi, 120.0)
    b = minimize_eta(phi, 120.0)
    assert a.x_star == b.x_star
    assert a.eta_star == b.eta_star
    assert list(a.features()) == [
        b.eta_star,
        b.eta_grad,
        b.eta_hess,
        b.mgf,
        b.mgf_grad,
        b.mgf_hess,
    ]


# ---------------------------------------------------------------------------
# system bound
# ---------------------------------------------------------------------------

def test_system_bound_single_server_identity():
    assert system_tail_bound([0.3]).kappa_bound == pytest.approx(0.3, rel=1e-15)


def test_system_bound_two_servers():
    assert system_tail_bound([0.5, 0.5]).kappa_bound == pytest.approx(0.75, rel=1e-15)


def test_system_bound_clamps_vacuous_terms():
    assert system_tail_bound([0.1, 1.7]).kappa_bound == 1.0


def test_system_bound_empty_error():
    with pytest.raises(ValueError):
        system_tail_bound([])


def test_system_bound_union_bracket():
    rng = np.random.default_rng(53)
    for _ in range(300):
        etas = rng.uniform(0.0, 1.4, rng.integers(1, 8)).tolist()
        bound = system_tail_bound(etas)
        clamped = [min(e, 1.0) for e in etas]
        assert bound.kappa_bound >= max(clamped) - 1e-12
        assert bound.kappa_bound <= min(1.0, sum(clamped)) + 1e-12
        assert bound.per_server == pytest.approx(etas)
