"""CSV readers/writers for traces, request logs, queue snapshots and policies.

All writers emit deterministic byte-identical output for identical inputs:
floats are rendered with ``repr(float(x))`` (shortest round-trip form) and
rows follow the array order handed in.  Infinite latencies are written as
``inf`` and parsed back by ``float()``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_trace",
    "read_trace",
    "write_requests",
    "read_requests",
    "write_snapshots",
    "read_snapshots",
    "write_policy",
    "read_policy",
    "write_cdf",
    "read_matrix",
]

TRACE_HEADER = ["arrival_ms", "service_id", "size_cycles"]
REQUESTS_HEADER = ["id", "service_id", "arrival_ms", "departure_ms", "latency_ms", "plan"]
SNAPSHOTS_HEADER = [
    "t_ms",
    "server_id",
    "q_up",
    "q_srv",
    "q_down",
    "backlog_up",
    "backlog_srv",
    "backlog_down",
]


def _fmt(x) -> str:
    return repr(float(x))


def write_trace(path, trace) -> None:
    """Write a request trace as CSV (arrival_ms, service_id, size_cycles)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for t, sid, size in zip(trace.times, trace.service_ids, trace.sizes):
            writer.writerow([_fmt(t), int(sid), _fmt(size)])


def read_trace(path):
    """Read a trace CSV back into a RequestTrace (seed is not stored: -1)."""
    from .workload import RequestTrace

    times, ids, sizes = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: expected header {TRACE_HEADER}, got {header}")
        for row in reader:
            times.append(float(row[0]))
            ids.append(int(row[1]))
            sizes.append(float(row[2]))
    times_arr = np.asarray(times, dtype=float)
    horizon = float(times_arr[-1]) if times_arr.shape[0] else 0.0
    return RequestTrace(
        times=times_arr,
        service_ids=np.asarray(ids, dtype=np.int64),
        sizes=np.asarray(sizes, dtype=float),
        seed=-1,
        horizon=horizon,
    )


def write_requests(path, records) -> None:
    """Write per-request outcomes; ``plan`` is '+'-joined server ids."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REQUESTS_HEADER)
        for rec in records:
            writer.writerow(
                [
                    int(rec.id),
                    int(rec.service_id),
                    _fmt(rec.arrival_ms),
                    _fmt(rec.departure_ms),
                    _fmt(rec.latency_ms),
                    "+".join(str(s) for s in rec.plan),
                ]
            )


def read_requests(path) -> list[dict]:
    """Read a request log back as dicts (plan as tuple of server ids)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != REQUESTS_HEADER:
            raise ValueError(f"{path}: expected header {REQUESTS_HEADER}, got {header}")
        for row in reader:
            out.append(
                {
                    "id": int(row[0]),
                    "service_id": int(row[1]),
                    "arrival_ms": float(row[2]),
                    "departure_ms": float(row[3]),
                    "latency_ms": float(row[4]),
                    "plan": tuple(int(p) for p in row[5].split("+")) if row[5] else (),
                }
            )
    return out


def write_snapshots(path, snapshots) -> None:
    """Write queue snapshots: one row per (time, server)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOTS_HEADER)
        for snap in snapshots:
            writer.writerow(
                [
                    _fmt(snap.t_ms),
                    int(snap.server_id),
                    int(snap.q_up),
                    int(snap.q_srv),
                    int(snap.q_down),
                    _fmt(snap.backlog_up),
                    _fmt(snap.backlog_srv),
                    _fmt(snap.backlog_down),
                ]
            )


def read_snapshots(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SNAPSHOTS_HEADER:
            raise ValueError(f"{path}: expected header {SNAPSHOTS_HEADER}, got {header}")
        for row in reader:
            out.append(
                {
                    "t_ms": float(row[0]),
                    "server_id": int(row[1]),
                    "q_up": int(row[2]),
                    "q_srv": int(row[3]),
                    "q_down": int(row[4]),
                    "backlog_up": float(row[5]),
                    "backlog_srv": float(row[6]),
                    "backlog_down": float(row[7]),
                }
            )
    return out


CDF_HEADER = ["latency_ms", "fraction"]


def write_cdf(path, points) -> None:
    """Write an empirical CDF step table as CSV (latency_ms, fraction)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CDF_HEADER)
        for x, f in points:
            writer.writerow([_fmt(x), _fmt(f)])


def read_matrix(path) -> np.ndarray:
    """Read a headerless CSV of floats into a rectangular 2-D array."""
    rows = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows (expected width {width})")
    return np.asarray(rows, dtype=float)


def write_policy(path, policy: dict) -> None:
    """Write a probabilistic dispatch policy as JSON {service_id: [probs]}."""
    doc = {str(k): [float(p) for p in v] for k, v in policy.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_policy(path) -> dict[int, list[float]]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return {int(k): [float(p) for p in v] for k, v in doc.items()}
