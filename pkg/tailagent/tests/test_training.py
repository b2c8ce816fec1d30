import json
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

pytest.importorskip("tailagent")

from tailagent.cli import main
from tailagent.client import GatewayClient
from tailagent.training import train

from toy_gateway import TOY_CONFIG, make_gateway_http


def _train_small(http, seed, episodes=3, **kw):
    defaults = dict(trunk_width=32, lr=1e-3)
    defaults.update(kw)
    return train(
        GatewayClient(http=http),
        episodes=episodes,
        steps=15,
        seed=seed,
        **defaults,
    )


def test_single_episode_smoke_writes_artifacts(tmp_path):
    with make_gateway_http(TOY_CONFIG) as http:
        result = _train_small(http, seed=1, episodes=1, out_dir=tmp_path)
    assert result.episode_rewards.shape == (1,)
    assert np.isfinite(result.episode_rewards).all()

    lines = (tmp_path / "rewards.csv").read_text().strip().splitlines()
    assert lines[0] == "episode,total_reward"
    episode, reward = lines[1].split(",")
    assert int(episode) == 1
    assert float(reward) == pytest.approx(result.episode_rewards[0])
    assert (tmp_path / "checkpoint.pt").exists()


def test_fixed_seed_reproduces_reward_curve():
    curves = []
    for _ in range(2):
        with make_gateway_http(TOY_CONFIG) as http:
            curves.append(_train_small(http, seed=9).episode_rewards)
    np.testing.assert_array_equal(curves[0], curves[1])

    with make_gateway_http(TOY_CONFIG) as http:
        other = _train_small(http, seed=10).episode_rewards
    assert not np.array_equal(curves[0], other)


def test_qla_mode_restricts_input_to_queue_statistics():
    with make_gateway_http(TOY_CONFIG) as http:
        full = _train_small(http, seed=1, episodes=1)
    with make_gateway_http(TOY_CONFIG) as http:
        qla = _train_small(http, seed=1, episodes=1, qla=True)
    assert full.agent.raw_input_dim == 36
    assert full.agent.network.input_dim == 36  # 18 * M
    assert qla.agent.raw_input_dim == 36
    assert qla.agent.network.input_dim == 24  # 12 * M
    assert qla.agent.network.total_action_units == full.agent.network.total_action_units


def _free_port():
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def live_gateway(tmp_path_factory):
    config_path = tmp_path_factory.mktemp("gw") / "toy.json"
    config_path.write_text(json.dumps(TOY_CONFIG))
    port = _free_port()
    proc = subprocess.Popen(
        ["tailsim", "serve", "--config", str(config_path), "--port", str(port)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        import httpx

        deadline = time.monotonic() + 15.0
        while time.monotonic() < deadline:
            try:
                httpx.get(f"http://127.0.0.1:{port}/v1/spec", timeout=1.0)
                break
            except httpx.TransportError:
                if proc.poll() is not None:
                    raise RuntimeError("gateway process died")
                time.sleep(0.2)
        else:
            raise RuntimeError("gateway never came up")
        yield f"http://127.0.0.1:{port}"
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_cli_trains_against_live_gateway(live_gateway, tmp_path):
    code = main(
        ["--gateway", live_gateway, "--episodes", "2", "--steps", "15",
         "--lr", "1e-3", "--sigma", "0.99", "--seed", "4",
         "--trunk-width", "32", "--out", str(tmp_path)]
    )
    assert code == 0
    lines = (tmp_path / "rewards.csv").read_text().strip().splitlines()
    assert len(lines) == 3  # header + 2 episodes
    assert (tmp_path / "checkpoint.pt").exists()


def test_cli_unreachable_gateway_fails_cleanly(tmp_path, capsys):
    code = main(
        ["--gateway", "http://127.0.0.1:1", "--episodes", "1", "--steps", "2",
         "--seed", "1", "--out", str(tmp_path), "--retries", "2"]
    )
    assert code == 1
    assert "error" in capsys.readouterr().err
