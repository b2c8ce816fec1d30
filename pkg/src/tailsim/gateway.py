"""HTTP gateway exposing the windowed environment to external agents.

One environment instance per session token; calls within a session are
strictly serialized by a per-session lock, so overlapping step requests are
queued, never interleaved.  All numbers travel as IEEE-754 doubles in
decimal JSON; the state vector is server-major, feature-minor (the exact
per-entry names are served under ``/v1/spec`` as ``state_labels``).

Endpoints (all JSON, under /v1):

* ``POST /v1/reset {seed, session?}`` — create (or reuse) a session and
  start a fresh episode; returns ``{session, state, m, i, plan_shapes}``.
* ``POST /v1/step {session, action}`` — install per-service plan
  distributions and run one decision window; returns
  ``{state, reward, done, info}``.
* ``GET /v1/spec?session=`` — full config echo plus state documentation.
* ``DELETE /v1/session?session=`` — drop a session.

Errors: malformed actions are 400 with the offending field named; stepping
a finished episode is 409; unknown sessions are 404.
"""

from __future__ import annotations

import threading
import uuid
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .config import SimulationConfig
from .environment import Environment, state_labels

__all__ = ["create_app", "serve"]


class _Session:
    __slots__ = ("env", "lock")

    def __init__(self, env: Environment):
        self.env = env
        self.lock = threading.Lock()


class ResetRequest(BaseModel):
    seed: int | None = None
    session: str | None = None


class StepRequest(BaseModel):
    session: str
    # Left untyped so shape problems surface as our 400s with field names
    # instead of schema-level 422s.
    action: Any


def create_app(config: SimulationConfig) -> FastAPI:
    """Build the ASGI application serving ``config``'s environment."""
    app = FastAPI(title="tail-latency environment gateway")
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def _lookup(token: str) -> _Session:
        with registry_lock:
            session = sessions.get(token)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {token!r}")
        return session

    @app.post("/v1/reset")
    def reset(body: ResetRequest) -> dict:
        if body.session is None:
            token = uuid.uuid4().hex
            session = _Session(Environment(config))
            with registry_lock:
                sessions[token] = session
        else:
            token = body.session
            session = _lookup(token)
        with session.lock:
            state = session.env.reset(seed=body.seed)
        return {
            "session": token,
            "state": [float(x) for x in state],
            "m": session.env.num_servers,
            "i": session.env.num_services,
            "plan_shapes": session.env.catalog.plan_shapes(),
        }

    @app.post("/v1/step")
    def step(body: StepRequest) -> dict:
        session = _lookup(body.session)
        with session.lock:
            try:
                state, reward, done, info = session.env.step(body.action)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except RuntimeError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {
            "state": [float(x) for x in state],
            "reward": float(reward),
            "done": bool(done),
            "info": info,
        }

    @app.get("/v1/spec")
    def spec(session: str = Query(...)) -> dict:
        env = _lookup(session).env
        return {
            "config": env.config.to_dict(),
            "m": env.num_servers,
            "i": env.num_services,
            "plan_shapes": env.catalog.plan_shapes(),
            "state_labels": state_labels(env.config),
        }

    @app.delete("/v1/session")
    def drop(session: str = Query(...)) -> dict:
        with registry_lock:
            found = sessions.pop(session, None)
        if found is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session!r}")
        return {"deleted": session}

    return app


def serve(config: SimulationConfig, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Run the gateway under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port)
