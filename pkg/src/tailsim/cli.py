"""Batch command-line entry points tying the pipeline together.

Subcommands:

* ``run``    — generate a trace, simulate it with one scheduler, write
  ``requests.csv``, ``queues.csv``, ``summary.json`` plus a config echo and
  a run manifest for reproducibility.
* ``bench``  — run the scenario × scheduler grid from the config's
  ``bench`` block (load_scale tuned per scenario to the target mean
  utilization) and emit a combined percentile table.
* ``bound``  — evaluate the per-server tail bounds under a routing matrix
  (CSV, services × servers) and print them with the system bound as JSON.
* ``report`` — recompute the latency summary, CDF table and queue means
  from a run directory's CSV artifacts.
* ``serve``  — host the HTTP environment gateway.

Flag errors exit 2 with usage; module errors exit 1 with a message.
"""

from __future__ import annotations

import argparse
import datetime
import json
import socket
import sys
import time
from pathlib import Path

import numpy as np

from . import gateway, io, metrics
from .analytics import evaluate_bound, system_tail_bound
from .config import ConfigError, SimulationConfig, build_catalog, load_config, subset_config
from .environment import routing_phi
from .schedulers import tune_load_scale
from .simulation import run as run_simulation
from .workload import generate_workload

__all__ = ["main"]

_BENCH_COLUMNS = [
    "scenario",
    "scheduler",
    "load_scale",
    "count",
    "p50",
    "p90",
    "p95",
    "p99",
    "p999",
    "mean",
    "infinite",
    "avg_queue",
]


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=["analytic", "coupled"], help="simulation mode override")
    parser.add_argument("--load-scale", type=float, help="arrival-rate scale override")
    parser.add_argument("--delta-ms", type=float, help="decision-window length override (ms)")
    parser.add_argument("--gamma-ms", type=float, help="tail-latency threshold override (ms)")


def _load_with_overrides(args) -> SimulationConfig:
    config = load_config(args.config)
    updates = {}
    if getattr(args, "mode", None) is not None:
        updates["mode"] = args.mode
    if getattr(args, "load_scale", None) is not None:
        updates["load_scale"] = args.load_scale
    if getattr(args, "delta_ms", None) is not None:
        updates["delta_ms"] = args.delta_ms
    if getattr(args, "gamma_ms", None) is not None:
        updates["gamma"] = args.gamma_ms
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return config.with_updates(**updates) if updates else config


def _write_summary(path, latencies, snapshots, arrivals, completed) -> dict:
    summary = metrics.summarize_latencies(latencies)
    per_server, overall = metrics.average_queue_length(snapshots)
    doc = {
        "latency": summary.as_dict(),
        "queue": {
            "per_server": {str(j): q for j, q in per_server.items()},
            "overall": overall,
        },
        "counts": {
            "arrivals": arrivals,
            "completed": completed,
            "infinite": summary.infinite,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    t0 = time.monotonic()
    config = _load_with_overrides(args)
    seed = config.seed if args.seed is None else args.seed

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    trace = generate_workload(config, seed=seed)
    result = run_simulation(
        config,
        trace,
        args.scheduler,
        seed=seed,
        snapshot_every_ms=config.step.delta_ms / 100.0,
    )

    io.write_requests(out / "requests.csv", result.records)
    io.write_snapshots(out / "queues.csv", result.snapshots)
    _write_summary(
        out / "summary.json",
        [rec.latency_ms for rec in result.records],
        result.snapshots,
        result.arrivals,
        result.completed,
    )
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    manifest = {
        "command": "run",
        "config_path": str(Path(args.config).resolve()),
        "seed": seed,
        "scheduler": args.scheduler,
        "mode": config.sim.mode,
        "out": str(out.resolve()),
        "started_utc": started.isoformat(),
        "elapsed_s": time.monotonic() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


def cmd_bench(args) -> int:
    config = _load_with_overrides(args)
    bench = config.bench
    if bench is None or not bench.scenarios or not bench.schedulers:
        print("error: config has no bench grid (scenarios and schedulers)", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for scenario in bench.scenarios:
        sub = subset_config(config, scenario.servers, scenario.services)
        if bench.horizon_ms is not None:
            sub = sub.with_updates(horizon_ms=bench.horizon_ms)
        catalog = build_catalog(sub)
        scale = tune_load_scale(sub, catalog, bench.target_utilization)
        tuned = sub.with_updates(load_scale=scale)
        for scheduler in bench.schedulers:
            per_seed = []
            for seed in bench.seeds:
                trace = generate_workload(tuned, seed=seed)
                result = run_simulation(
                    tuned,
                    trace,
                    scheduler,
                    seed=seed,
                    snapshot_every_ms=tuned.step.delta_ms / 100.0,
                )
                summary = metrics.summarize_latencies(
                    [rec.latency_ms for rec in result.records]
                )
                _, avg_queue = metrics.average_queue_length(result.snapshots)
                per_seed.append((summary, avg_queue))

            def med(pick):
                return float(np.median([pick(s, q) for s, q in per_seed]))

            rows.append(
                {
                    "scenario": scenario.name,
                    "scheduler": scheduler,
                    "load_scale": scale,
                    "count": int(med(lambda s, q: s.count)),
                    "p50": med(lambda s, q: s.p50),
                    "p90": med(lambda s, q: s.p90),
                    "p95": med(lambda s, q: s.p95),
                    "p99": med(lambda s, q: s.p99),
                    "p999": med(lambda s, q: s.p999),
                    "mean": med(lambda s, q: s.mean),
                    "infinite": int(med(lambda s, q: s.infinite)),
                    "avg_queue": med(lambda s, q: q),
                }
            )

    doc = {
        "target_utilization": bench.target_utilization,
        "seeds": list(bench.seeds),
        "rows": rows,
    }
    (out / "bench.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(out / "bench.csv", "w") as fh:
        fh.write(",".join(_BENCH_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in _BENCH_COLUMNS) + "\n")

    widths = {c: max(len(c), *(len(f"{row[c]:.3f}" if isinstance(row[c], float) else str(row[c])) for row in rows)) for c in _BENCH_COLUMNS}
    print("  ".join(c.ljust(widths[c]) for c in _BENCH_COLUMNS))
    for row in rows:
        cells = [
            (f"{row[c]:.3f}" if isinstance(row[c], float) else str(row[c])).ljust(widths[c])
            for c in _BENCH_COLUMNS
        ]
        print("  ".join(cells))
    return 0


def cmd_bound(args) -> int:
    # --gamma-ms is a pure analysis parameter here: no stepping happens, so
    # it must not be subject to the window-length consistency check that a
    # config-level gamma override would trigger.
    gamma_override = args.gamma_ms
    args.gamma_ms = None
    config = _load_with_overrides(args)
    omega = io.read_matrix(args.omega)
    n_services, n_servers = config.num_services, config.num_servers
    if omega.shape != (n_services, n_servers):
        raise ValueError(
            f"omega matrix: expected {n_services} rows x {n_servers} columns, "
            f"got {omega.shape[0]} x {omega.shape[1]}"
        )
    gamma = config.reward.gamma if gamma_override is None else gamma_override
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    servers = []
    etas = []
    for j, server in enumerate(config.servers):
        phi = routing_phi(config, server, omega[:, j])
        ev = evaluate_bound(phi, gamma)
        etas.append(ev.eta_star)
        servers.append(
            {
                "server_id": server.id,
                "phi": list(phi.as_tuple()),
                "x_star": ev.x_star,
                "eta_star": ev.eta_star,
                "vacuous": ev.vacuous,
            }
        )
    doc = {
        "gamma_ms": gamma,
        "servers": servers,
        "kappa_bound": system_tail_bound(etas).kappa_bound,
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    requests_path = run_dir / "requests.csv"
    if not requests_path.exists():
        raise FileNotFoundError(f"{requests_path}: no request log found")
    records = io.read_requests(requests_path)
    if not records:
        raise ValueError(f"{requests_path}: empty request log")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    latencies = [r["latency_ms"] for r in records]
    summary = metrics.summarize_latencies(latencies)
    doc = {"latency": summary.as_dict()}

    io.write_cdf(out / "cdf.csv", metrics.export_cdf(latencies))

    snaps_path = run_dir / "queues.csv"
    if snaps_path.exists():
        from .simulation import QueueSnapshot

        snapshots = [QueueSnapshot(**row) for row in io.read_snapshots(snaps_path)]
        per_server, overall = metrics.average_queue_length(snapshots)
        doc["queue"] = {
            "per_server": {str(j): q for j, q in per_server.items()},
            "overall": overall,
        }
        with open(out / "queues.csv", "w") as fh:
            fh.write("server_id,avg_queue_len\n")
            for j, q in per_server.items():
                fh.write(f"{j},{repr(float(q))}\n")
            fh.write(f"overall,{repr(float(overall))}\n")

    (out / "summary.json").write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_serve(args) -> int:
    config = _load_with_overrides(args)
    # Fail fast with a clean message when the port is taken.
    probe = socket.socket()
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port} ({exc})", file=sys.stderr)
        return 2
    finally:
        probe.close()
    gateway.serve(config, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailsim",
        description="Tail-latency simulation, bounds, benchmarking and serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one trace and write artifacts")
    p_run.add_argument("--config", required=True, help="config JSON path")
    p_run.add_argument("--scheduler", required=True, choices=["rd", "gd", "da"])
    p_run.add_argument("--seed", type=int, help="workload/simulation seed")
    p_run.add_argument("--out", required=True, help="output directory")
    _add_override_flags(p_run)

    p_bench = sub.add_parser("bench", help="run the scenario x scheduler grid")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out", required=True)
    _add_override_flags(p_bench)

    p_bound = sub.add_parser("bound", help="tail bounds under a routing matrix")
    p_bound.add_argument("--config", required=True)
    p_bound.add_argument("--omega", required=True, help="routing matrix CSV (services x servers)")
    _add_override_flags(p_bound)

    p_report = sub.add_parser("report", help="summaries from run artifacts")
    p_report.add_argument("run_dir", help="directory produced by `run`")
    p_report.add_argument("--out", required=True)

    p_serve = sub.add_parser("serve", help="host the HTTP environment gateway")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    _add_override_flags(p_serve)

    return parser


_COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "bound": cmd_bound,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
