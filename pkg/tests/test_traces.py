import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from selfcore.errors import DimensionMismatch, NonFiniteValue, PoolTooSmall
from selfcore.traces import (
    ActivationTrace,
    DenseLayer,
    MlpWeights,
    ReferenceSet,
    mlp_forward_collect,
    sample_reference_states,
    zscore_normalize,
)

from conftest import make_trace, norm


def test_zscore_hand_row():
    nt = norm([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(nt.values[0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    assert nt.alive_mask.tolist() == [True]


def test_constant_row_is_dead():
    nt = norm([[5.0, 5.0, 5.0, 5.0], [1.0, 0.0, 1.0, 0.0]])
    assert nt.alive_mask.tolist() == [False, True]
    assert np.all(nt.values[0] == 0.0)


def test_dead_threshold_is_configurable():
    t = make_trace([[0.0, 1e-4, 0.0, 1e-4], [0.0, 1.0, 2.0, 3.0]])
    assert zscore_normalize(t).alive_mask.tolist() == [True, True]
    assert zscore_normalize(t, dead_std_threshold=1e-3).alive_mask.tolist() == [False, True]


def test_random_trace_moments(rng):
    x = rng.standard_normal((150, 1000)) * rng.uniform(0.1, 10, (150, 1)) + rng.uniform(-5, 5, (150, 1))
    nt = norm(x)
    assert nt.alive_mask.all()
    assert np.abs(nt.values.mean(axis=1)).max() < 1e-9
    assert np.abs(nt.values.std(axis=1) - 1.0).max() < 1e-6


finite_rows = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 12)),
                     elements=st.floats(-1e3, 1e3, allow_nan=False, width=64))


@settings(max_examples=80, deadline=None)
@given(finite_rows)
def test_normalization_idempotent_and_counts(x):
    once = zscore_normalize(make_trace(x))
    twice = zscore_normalize(once)
    alive = once.alive_mask
    assert alive.sum() + (~alive).sum() == x.shape[0]
    np.testing.assert_allclose(twice.values[twice.alive_mask], once.values[twice.alive_mask], atol=1e-9)
    assert np.all(once.values[~alive] == 0.0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (2, 20), elements=st.floats(-100, 100, allow_nan=False)))
def test_cosine_of_zscores_is_pearson(x):
    nt = zscore_normalize(make_trace(x))
    if not nt.alive_mask.all() or np.any(x.std(axis=1) < 1e-3):
        return
    a, b = nt.values
    cos = a @ b / np.sqrt((a @ a) * (b @ b))
    assert cos == pytest.approx(np.corrcoef(x)[0, 1], abs=1e-9)


def test_trace_validation():
    with pytest.raises(NonFiniteValue):
        make_trace([[1.0, np.nan]])
    with pytest.raises(DimensionMismatch):
        make_trace([[1.0]])


def test_forward_relu_clamps():
    w = MlpWeights(input_dim=1, layers=[DenseLayer([[1.0]], [0.0], "relu"), DenseLayer([[1.0]], [0.0], "relu")])
    traces = mlp_forward_collect(w, ReferenceSet(np.array([[-1.0], [2.0]])))
    assert len(traces) == 1
    np.testing.assert_array_equal(traces[0].values, [[0.0, 2.0]])


def test_forward_tanh_zero_weights_all_dead():
    w = MlpWeights(input_dim=3, layers=[DenseLayer(np.zeros((4, 3)), np.zeros(4), "tanh"),
                                        DenseLayer(np.zeros((2, 4)), np.zeros(2), "tanh")])
    refs = ReferenceSet(np.random.default_rng(0).standard_normal((10, 3)))
    (t,) = mlp_forward_collect(w, refs)
    assert np.all(t.values == 0.0)
    assert not zscore_normalize(t).alive_mask.any()


def test_forward_matches_per_state_loop(rng):
    w1, b1 = rng.standard_normal((6, 4)), rng.standard_normal(6)
    w2, b2 = rng.standard_normal((5, 6)), rng.standard_normal(5)
    w3, b3 = rng.standard_normal((2, 5)), rng.standard_normal(2)
    net = MlpWeights(4, [DenseLayer(w1, b1, "relu"), DenseLayer(w2, b2, "elu"), DenseLayer(w3, b3, "tanh")])
    states = rng.standard_normal((20, 4))
    l1, l2 = mlp_forward_collect(net, ReferenceSet(states))
    for t in range(20):
        h1 = [max(sum(w1[i][k] * states[t][k] for k in range(4)) + b1[i], 0.0) for i in range(6)]
        pre = [sum(w2[i][k] * h1[k] for k in range(6)) + b2[i] for i in range(5)]
        h2 = [p if p > 0 else np.exp(p) - 1.0 for p in pre]
        np.testing.assert_allclose(l1.values[:, t], h1, atol=1e-12)
        np.testing.assert_allclose(l2.values[:, t], h2, atol=1e-12)
    assert (l1.layer, l2.layer) == (1, 2)


def test_forward_dimension_mismatch():
    net = MlpWeights(2, [DenseLayer(np.ones((3, 2)), np.zeros(3)), DenseLayer(np.ones((1, 3)), np.zeros(1))])
    with pytest.raises(DimensionMismatch):
        mlp_forward_collect(net, ReferenceSet(np.ones((4, 3))))


def test_mlp_layer_chain_checked():
    with pytest.raises(DimensionMismatch):
        MlpWeights(2, [DenseLayer(np.ones((3, 2)), np.zeros(3)), DenseLayer(np.ones((1, 4)), np.zeros(1))])


def test_sample_exhaustive_and_deterministic(rng):
    pool = rng.standard_normal((5, 3))
    refs = sample_reference_states([pool], 5, seed=1)
    assert sorted(map(tuple, refs.states)) == sorted(map(tuple, pool))
    pools = [rng.standard_normal((7, 3)), rng.standard_normal((9, 3))]
    a = sample_reference_states(pools, 6, seed=42)
    b = sample_reference_states(pools, 6, seed=42)
    np.testing.assert_array_equal(a.states, b.states)
    assert a.source_ids == b.source_ids and a.reference_id == b.reference_id


def test_sample_pool_too_small():
    with pytest.raises(PoolTooSmall):
        sample_reference_states([np.zeros((3, 2)), np.zeros((2, 2))], 6, seed=0)


def test_sample_counts_follow_hypergeometric():
    # T=100 from three pools of 200: count per pool ~ Hypergeometric(N=600, K=200, n=100)
    N, K, n = 600, 200, 100
    mean = n * K / N
    sd = np.sqrt(n * (K / N) * (1 - K / N) * (N - n) / (N - 1))
    pools = [np.full((200, 1), float(p)) for p in range(3)]
    counts = np.array([[np.sum(sample_reference_states(pools, n, seed=s).states[:, 0] == p) for p in range(3)]
                       for s in range(200)])
    assert np.all(np.abs(counts - mean) <= 4 * sd)
    assert np.all(np.abs(counts.mean(axis=0) - mean) <= 4 * sd / np.sqrt(200))
