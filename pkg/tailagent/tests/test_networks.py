import numpy as np
import pytest

pytest.importorskip("tailagent")

import torch

from tailagent.networks import BranchingPolicyNetwork, RunningNormalizer


def test_total_action_units_is_sum_of_head_sizes():
    net = BranchingPolicyNetwork(36, [3, 5, 2], trunk_width=64, dropout=0.0)
    assert net.total_action_units == 10
    logits = net(torch.zeros(36))
    assert [t.shape[-1] for t in logits] == [3, 5, 2]


def test_heads_read_disjoint_trunk_slices():
    """Perturbing another head's slice must not move this head's logits."""
    torch.manual_seed(0)
    net = BranchingPolicyNetwork(8, [4, 4], trunk_width=10, dropout=0.0)
    net.eval()
    lo0, hi0 = net.head_slices[0]
    lo1, hi1 = net.head_slices[1]
    assert hi0 <= lo1  # contiguous, non-overlapping
    assert hi1 <= 10

    trunk = torch.randn(10, dtype=torch.get_default_dtype())
    base = [h.detach().clone() for h in net.head_logits(trunk)]
    trunk2 = trunk.clone()
    trunk2[lo1:hi1] += 5.0  # head 0 must not see this
    moved = net.head_logits(trunk2)
    assert torch.equal(base[0], moved[0])
    assert not torch.equal(base[1], moved[1])


def test_zeroed_heads_give_uniform_distributions():
    net = BranchingPolicyNetwork(12, [3, 4], trunk_width=32, dropout=0.0)
    net.zero_heads()
    for logits in net(torch.randn(12)):
        probs = torch.softmax(logits, dim=-1)
        np.testing.assert_allclose(
            probs.detach().numpy(), np.full(len(probs), 1.0 / len(probs)), atol=1e-12
        )


def test_distributions_are_simplex_valued():
    torch.manual_seed(3)
    net = BranchingPolicyNetwork(6, [5, 3, 2], trunk_width=16, dropout=0.0)
    for _ in range(20):
        for logits in net(torch.randn(6) * 100.0):
            probs = torch.softmax(logits, dim=-1)
            assert abs(float(probs.sum()) - 1.0) <= 1e-6
            assert (probs >= 0).all()


def test_extreme_inputs_no_nan_after_normalization():
    norm = RunningNormalizer(6)
    rng = np.random.default_rng(1)
    for _ in range(50):
        norm.update(rng.normal(0, 1e5, size=6))
    net = BranchingPolicyNetwork(6, [4, 4], trunk_width=32, dropout=0.0)
    for scale in (1.0, 1e3, 1e6):
        x = norm.normalize(np.array([scale, -scale, scale, 0.0, scale, -scale]))
        assert np.isfinite(x).all()
        for logits in net(torch.as_tensor(x, dtype=torch.get_default_dtype())):
            probs = torch.softmax(logits, dim=-1)
            assert torch.isfinite(probs).all()


def test_running_normalizer_tracks_mean_and_variance():
    rng = np.random.default_rng(4)
    samples = rng.normal(5.0, 3.0, size=(20000, 2))
    norm = RunningNormalizer(2)
    for row in samples:
        norm.update(row)
    np.testing.assert_allclose(norm.mean, samples.mean(axis=0), rtol=1e-9)
    np.testing.assert_allclose(norm.variance, samples.var(axis=0), rtol=1e-9)
    z = norm.normalize(samples[0])
    np.testing.assert_allclose(
        z, (samples[0] - samples.mean(0)) / np.sqrt(samples.var(0) + 1e-8), rtol=1e-9
    )


def test_normalizer_state_round_trip():
    norm = RunningNormalizer(3)
    rng = np.random.default_rng(5)
    for _ in range(100):
        norm.update(rng.normal(size=3))
    clone = RunningNormalizer(3)
    clone.load_state_dict(norm.state_dict())
    x = rng.normal(size=3)
    np.testing.assert_array_equal(norm.normalize(x), clone.normalize(x))


def test_input_dimension_mismatch_raises():
    net = BranchingPolicyNetwork(10, [2, 2], trunk_width=8, dropout=0.0)
    with pytest.raises(ValueError, match="state length"):
        net(torch.zeros(7))
