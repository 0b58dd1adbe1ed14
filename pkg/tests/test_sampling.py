import math

import numpy as np
import pytest

from stbon.errors import EmptySupportError
from stbon.sampling import SamplingParams, derive_rng, sample_token, transform_logits


def hand_softmax(logits, temperature=1.0):
    weights = [math.exp(x / temperature) for x in logits]
    total = sum(weights)
    return [w / total for w in weights]


def test_worked_example_topk_topp():
    # softmax([2,1,0]) = [0.6652, 0.2447, 0.0900]; cumulative 0.9100 >= 0.9
    # after two tokens, so support {0,1}, renormalized [0.7311, 0.2689].
    params = SamplingParams(top_k=3, top_p=0.9, temperature=1.0)
    dist = transform_logits(np.array([2.0, 1.0, 0.0]), params)
    oracle = hand_softmax([2.0, 1.0, 0.0])
    assert oracle == pytest.approx([0.6652, 0.2447, 0.0900], abs=1e-4)
    assert set(dist.support.tolist()) == {0, 1}
    expected = [oracle[0] / (oracle[0] + oracle[1]), oracle[1] / (oracle[0] + oracle[1]), 0.0]
    assert dist.probs == pytest.approx(expected, abs=1e-9)
    assert dist.probs[:2] == pytest.approx([0.7311, 0.2689], abs=1e-4)


def test_uniform_logits_stay_uniform():
    params = SamplingParams(top_k=8, top_p=1.0, temperature=2.7)
    dist = transform_logits(np.zeros(8), params)
    assert dist.probs == pytest.approx([1 / 8] * 8, abs=1e-12)
    assert dist.support.tolist() == list(range(8))


def test_top_k_one_is_greedy():
    params = SamplingParams(top_k=1, top_p=1.0, temperature=0.7)
    dist = transform_logits(np.array([0.3, 2.0, -1.0, 1.9]), params)
    assert dist.support.tolist() == [1]
    assert dist.probs[1] == 1.0
    rng = derive_rng(0, 9)
    assert all(sample_token(dist, rng) == 1 for _ in range(20))


def test_empirical_frequencies_match_probs():
    params = SamplingParams(top_k=2, top_p=1.0, temperature=1.0)
    dist = transform_logits(np.array([0.0, 0.0]), params)
    rng = derive_rng(123, 9)
    draws = np.array([sample_token(dist, rng) for _ in range(10000)])
    freq = (draws == 0).mean()
    assert 0.47 <= freq <= 0.53


def test_fixed_seed_reproducible():
    params = SamplingParams(seed=7)
    dist = transform_logits(np.linspace(0, 3, 32), params)
    a = [sample_token(dist, params.stream(2)) for _ in range(1)]
    b = [sample_token(dist, params.stream(2)) for _ in range(1)]
    seq_a = []
    stream = params.stream(4)
    for _ in range(50):
        seq_a.append(sample_token(dist, stream))
    stream = params.stream(4)
    seq_b = [sample_token(dist, stream) for _ in range(50)]
    assert a == b
    assert seq_a == seq_b


def test_per_sample_streams_independent_of_n():
    params = SamplingParams(seed=3)
    first = params.stream(1).random(5)
    again = params.stream(1).random(5)
    other = params.stream(0).random(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_shift_invariance():
    rng = derive_rng(5, 9)
    params = SamplingParams(top_k=10, top_p=0.8, temperature=0.9)
    for _ in range(25):
        logits = rng.normal(size=24)
        base = transform_logits(logits, params)
        shifted = transform_logits(logits + 13.7, params)
        assert np.array_equal(base.support, shifted.support)
        assert base.probs == pytest.approx(shifted.probs, abs=1e-12)


def test_mass_normalized_and_zero_outside_support():
    rng = derive_rng(6, 9)
    params = SamplingParams(top_k=5, top_p=0.7, temperature=0.6)
    for _ in range(25):
        dist = transform_logits(rng.normal(size=40), params)
        inside = dist.probs[dist.support].sum()
        assert abs(inside - 1.0) <= 1e-9
        mask = np.ones(40, dtype=bool)
        mask[dist.support] = False
        assert np.all(dist.probs[mask] == 0.0)


def test_low_temperature_collapses_to_argmax():
    params = SamplingParams(top_k=3, top_p=0.9, temperature=1e-3)
    dist = transform_logits(np.array([3.0, 1.0, 0.0]), params)
    assert dist.support.tolist() == [0]


def test_all_negative_infinite_logits_error():
    params = SamplingParams()
    with pytest.raises(EmptySupportError):
        transform_logits(np.full(8, -np.inf), params)


def test_tie_break_prefers_lower_ids():
    params = SamplingParams(top_k=2, top_p=1.0, temperature=1.0)
    dist = transform_logits(np.zeros(5), params)
    assert dist.support.tolist() == [0, 1]
    # and inside top-p: equal probabilities keep id order in the prefix
    params = SamplingParams(top_k=4, top_p=0.5, temperature=1.0)
    dist = transform_logits(np.zeros(4), params)
    assert dist.support.tolist() == [0, 1]
