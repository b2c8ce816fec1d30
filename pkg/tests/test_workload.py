"""Poisson trace generation: determinism, marginals, exponentiality."""

import numpy as np
import pytest
from scipy import stats

from suite_helpers import table_config_dict
from tailsim.config import ConfigError, parse_config
from tailsim.workload import RequestTrace, generate_workload
from tailsim import io as tio


def _nine_service_config(horizon_ms=10000.0):
    """Nine services on one catch-all server (workload marginals test)."""
    lambdas_per_sec = [400, 500, 600, 300, 400, 500, 400, 400, 300]
    sizes = [4.1e7, 4.0e7, 4.2e7, 4.9e7, 4.0e7, 4.0e7, 4.2e7, 4.5e7, 4.9e7]
    return parse_config(
        {
            "servers": [
                {
                    "id": 1,
                    "r_u": 1e7,
                    "r_s": 1e7,
                    "r_d": 1e7,
                    "supported": list(range(1, 10)),
                }
            ],
            "services": [
                {
                    "id": i + 1,
                    "lambda_per_sec": float(lambdas_per_sec[i]),
                    "mean_size_cycles": sizes[i],
                }
                for i in range(9)
            ],
            "sim": {"horizon_ms": horizon_ms},
            "seed": 3,
        }
    )


def test_identical_seed_identical_trace():
    config = parse_config(table_config_dict())
    a = generate_workload(config, seed=42)
    b = generate_workload(config, seed=42)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.service_ids, b.service_ids)
    assert np.array_equal(a.sizes, b.sizes)


def test_different_seed_different_trace():
    config = parse_config(table_config_dict())
    a = generate_workload(config, seed=1)
    b = generate_workload(config, seed=2)
    assert not np.array_equal(a.times, b.times)


def test_per_service_counts_match_rates():
    config = _nine_service_config()
    trace = generate_workload(config, seed=11)
    horizon = config.sim.horizon_ms
    for service in config.services:
        expected = service.lam * horizon
        count = int(np.sum(trace.service_ids == service.id))
        assert abs(count - expected) <= 3.0 * np.sqrt(expected), service.id


def test_times_sorted_within_horizon():
    config = _nine_service_config()
    trace = generate_workload(config, seed=5)
    assert np.all(np.diff(trace.times) >= 0)
    assert trace.times[0] >= 0.0
    assert trace.times[-1] < config.sim.horizon_ms
    assert len(trace) == trace.times.shape[0]


def test_deterministic_sizes_are_exact():
    config = parse_config(
        table_config_dict(horizon_ms=50000.0),
    )
    doc = config.to_dict()
    for service in doc["services"]:
        service["size_distribution"] = "deterministic"
    config = parse_config(doc)
    trace = generate_workload(config, seed=9)
    for service in config.services:
        sizes = trace.sizes[trace.service_ids == service.id]
        assert np.all(sizes == service.mean_size)


def test_exponential_sizes_quantized_for_exact_splits():
    config = parse_config(table_config_dict())
    q = config.size_quantum
    trace = generate_workload(config, seed=13)
    assert np.all(trace.sizes >= q)
    assert np.all(np.mod(trace.sizes, q) == 0)
    # quantization must not visibly distort the mean (quantum ~ 1e-6 relative)
    for service in config.services:
        sizes = trace.sizes[trace.service_ids == service.id]
        n = len(sizes)
        assert abs(sizes.mean() - service.mean_size) <= 3.5 * service.mean_size / np.sqrt(n)


def test_load_scale_scales_counts():
    base = _nine_service_config()
    scaled = base.with_updates(load_scale=0.5)
    full = len(generate_workload(base, seed=21))
    half = len(generate_workload(scaled, seed=21))
    expected = 0.5 * full
    assert abs(half - expected) <= 3.0 * np.sqrt(expected)


def test_inter_arrival_exponentiality_chi_square():
    # >= 10^4 arrivals, 0.01 significance, equal-probability bins
    config = parse_config(
        {
            "servers": [{"id": 1, "r_u": 1e7, "r_s": 1e7, "r_d": 1e7, "supported": [1, 2]}],
            "services": [
                {"id": 1, "lambda_per_sec": 1000.0, "mean_size_cycles": 4e7},
                {"id": 2, "lambda_per_sec": 700.0, "mean_size_cycles": 4e7},
            ],
            "sim": {"horizon_ms": 15000.0},
            "seed": 0,
        }
    )
    trace = generate_workload(config, seed=101)
    for service in config.services:
        arrivals = trace.times[trace.service_ids == service.id]
        gaps = np.diff(arrivals)
        assert len(gaps) >= 10000
        k = 20
        with np.errstate(divide="ignore"):
            edges = -np.log(1.0 - np.arange(k + 1) / k) / service.lam
        edges[-1] = np.inf
        observed, _ = np.histogram(gaps, bins=edges)
        expected = np.full(k, len(gaps) / k)
        stat = np.sum((observed - expected) ** 2 / expected)
        p_value = stats.chi2.sf(stat, df=k - 1)
        assert p_value >= 0.01, f"service {service.id}: p={p_value}"


def test_horizon_must_be_positive():
    # A zero horizon is rejected no later than workload generation; the
    # config layer is allowed to fail faster, at revalidation time.
    config = parse_config(table_config_dict())
    with pytest.raises((ConfigError, ValueError), match="horizon"):
        broken = config.with_updates(horizon_ms=0.0)
        generate_workload(broken, seed=1)


def test_trace_csv_round_trip(tmp_path):
    config = parse_config(table_config_dict(horizon_ms=500.0))
    trace = generate_workload(config, seed=17)
    path = tmp_path / "trace.csv"
    tio.write_trace(path, trace)
    text = path.read_text().splitlines()
    assert text[0] == "arrival_ms,service_id,size_cycles"
    back = tio.read_trace(path)
    assert np.array_equal(back.times, trace.times)
    assert np.array_equal(back.service_ids, trace.service_ids)
    assert np.array_equal(back.sizes, trace.sizes)


def test_trace_is_dataclass_with_metadata():
    config = parse_config(table_config_dict(horizon_ms=1000.0))
    trace = generate_workload(config, seed=23)
    assert isinstance(trace, RequestTrace)
    assert trace.seed == 23
    assert trace.horizon == 1000.0
