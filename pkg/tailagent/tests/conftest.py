"""Shared fixtures for the agent tests (torch-gated)."""

import pytest

torch = pytest.importorskip("torch")

from toy_gateway import TOY_CONFIG, make_gateway_http


@pytest.fixture()
def toy_http():
    http = make_gateway_http(TOY_CONFIG)
    with http:
        yield http
