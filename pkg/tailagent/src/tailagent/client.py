"""HTTP client for the simulation gateway's session protocol.

The agent consumes the cluster exclusively through four endpoints — reset,
step, spec, and session deletion.  Transient transport failures are retried
with exponential backoff; protocol errors (4xx/5xx) surface immediately as
``GatewayError``.
"""

from __future__ import annotations

import time
from typing import Any

import httpx

__all__ = ["GatewayClient", "GatewayError"]


class GatewayError(RuntimeError):
    """The gateway rejected a request or became unreachable."""


class GatewayClient:
    def __init__(
        self,
        base_url: str | None = None,
        *,
        http: Any | None = None,
        retries: int = 5,
        backoff_s: float = 0.25,
        timeout: float = 30.0,
    ):
        if http is None and base_url is None:
            raise ValueError("either base_url or an http client is required")
        self._owns_http = http is None
        self._http = http if http is not None else httpx.Client(
            base_url=base_url, timeout=timeout
        )
        self.retries = max(1, int(retries))
        self.backoff_s = float(backoff_s)
        self.session: str | None = None

    # -- transport ------------------------------------------------------

    def _request(self, method: str, path: str, **kwargs) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                response = getattr(self._http, method)(path, **kwargs)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 400:
                try:
                    detail = response.json().get("detail", "")
                except Exception:
                    detail = response.text
                raise GatewayError(
                    f"gateway returned {response.status_code} for {path}: {detail}"
                )
            return response.json()
        raise GatewayError(
            f"gateway unreachable after {self.retries} attempts: {last_error}"
        )

    # -- protocol -------------------------------------------------------

    def reset(self, seed: int | None = None) -> dict:
        body: dict = {"seed": seed}
        if self.session is not None:
            body["session"] = self.session
        doc = self._request("post", "/v1/reset", json=body)
        self.session = doc["session"]
        return doc

    def step(self, action) -> dict:
        if self.session is None:
            raise GatewayError("no session: call reset() first")
        return self._request(
            "post", "/v1/step", json={"session": self.session, "action": action}
        )

    def spec(self) -> dict:
        if self.session is None:
            raise GatewayError("no session: call reset() first")
        return self._request("get", "/v1/spec", params={"session": self.session})

    def delete_session(self) -> None:
        if self.session is None:
            return
        self._request("delete", "/v1/session", params={"session": self.session})
        self.session = None

    def close(self) -> None:
        if self._owns_http:
            self._http.close()

    def __enter__(self) -> "GatewayClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
