import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermsg import tensor as T
from hypermsg.aggregate import (
    AggregationConfig,
    ImportanceNet,
    Normalization,
    generalized_mean,
    geometric_mean,
    importance_forward,
    inter_edge_aggregate,
    intra_edge_aggregate,
    node_aggregate,
    sample_condensed_neighborhood,
    sample_pairs,
    sampling_distribution,
    split_weight,
    two_level_aggregate,
)
from hypermsg.errors import EmptyNeighborhood, EmptySet, ZeroPower
from hypermsg.hypergraph import Hypergraph, SplitPlan, split_hyperedge

from test_hypergraph import hypergraphs


def test_generalized_mean_examples():
    assert generalized_mean([1.0, 2.0, 3.0], np.full(3, 1 / 3), 1.0) == pytest.approx(2.0)
    assert generalized_mean([3.0, 4.0], [0.5, 0.5], 2.0) == pytest.approx(math.sqrt(12.5))
    assert generalized_mean([1.0, 2.0, 3.0], None, 64.0) == pytest.approx(3.0, rel=0.02)


def test_generalized_mean_errors():
    with pytest.raises(EmptySet):
        generalized_mean(np.zeros((0, 2)))
    with pytest.raises(ZeroPower):
        generalized_mean([1.0, 2.0], p=0.0)
    with pytest.raises(ZeroPower):
        AggregationConfig(p=0.0)
    AggregationConfig(p=0.0, geometric=True)


def test_geometric_mean_limit():
    vals = np.array([1.0, 4.0, 16.0])
    assert geometric_mean(vals) == pytest.approx(4.0)
    assert generalized_mean(vals, p=1e-4) == pytest.approx(4.0, rel=1e-3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=6), st.floats(-3.0, 3.0).filter(lambda p: abs(p) > 0.2))
def test_generalized_mean_bounds(vals, p):
    m = generalized_mean(np.array(vals), p=p)
    assert min(vals) - 1e-9 <= m <= max(vals) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=6))
def test_power_mean_monotone_in_p(vals):
    vals = np.array(vals)
    means = [generalized_mean(vals, p=p) for p in (0.5, 1.0, 2.0, 4.0)]
    assert all(a <= b + 1e-9 for a, b in zip(means, means[1:]))


def test_split_weight_examples():
    h = Hypergraph(5, [[0, 1, 2, 3, 4]])
    assert split_weight(h, 0, 0, [0]) == 1.0
    # two split edges with the same intra size as the original
    g = Hypergraph(5, [[0, 1, 2], [0, 1, 2]])
    assert split_weight(g, 0, 0, [0, 1]) == pytest.approx(0.5)
    h2 = split_hyperedge(h, SplitPlan(0, 0, ([1, 2], [3, 4])))
    assert split_weight(h, 0, 0, [0, 1], split_graph=h2) == pytest.approx(0.25)


def test_intra_edge_examples():
    h = Hypergraph(3, [[0, 1, 2]])
    x = np.array([[9.0, 9.0], [1.0, 0.0], [3.0, 2.0]])
    assert np.allclose(intra_edge_aggregate(h, x, 0, 0, AggregationConfig()), [2.0, 1.0])
    pair = Hypergraph(2, [[0, 1]])
    for p in (0.5, 1.0, 3.0):
        assert np.allclose(intra_edge_aggregate(pair, x[:2], 0, 0, AggregationConfig(p=p)), x[1])
    cfg = AggregationConfig(adaptive=True)
    C = np.full(3, 2.5)
    assert np.allclose(intra_edge_aggregate(h, x, 0, 0, cfg, importance=C), [5.0, 2.5])


def test_inter_edge_examples():
    cfg = AggregationConfig()
    assert np.allclose(inter_edge_aggregate([[2.0, 0.0], [0.0, 2.0]], cfg), [1.0, 1.0])
    assert np.allclose(inter_edge_aggregate([[3.0, -1.0]], AggregationConfig(p=3.0)), [3.0, -1.0])
    assert np.array_equal(inter_edge_aggregate([], cfg, dim=3), np.zeros(3))


def test_global_normalization_differs():
    h = Hypergraph(5, [[0, 1, 2], [0, 3]])
    x = np.arange(10.0).reshape(5, 2)
    intra = AggregationConfig(normalization="intra")
    glob = AggregationConfig(normalization="global")
    assert glob.normalization is Normalization.GLOBAL_MAIN_TEXT
    # 1/|N(v)| = 1/3 instead of 1/|N(v,e)| = 1/2
    assert np.allclose(intra_edge_aggregate(h, x, 0, 0, glob), (x[1] + x[2]) / 3)
    assert np.allclose(intra_edge_aggregate(h, x, 0, 0, intra), (x[1] + x[2]) / 2)


@pytest.mark.parametrize("p", [1.0, 2.0, 0.5, 3.0])
@pytest.mark.parametrize("norm", ["intra", "global"])
def test_vectorized_matches_reference(p, norm):
    rng = np.random.default_rng(int(p * 10))
    h = Hypergraph(12, [rng.choice(12, size=int(rng.integers(2, 6)), replace=False) for _ in range(9)])
    x = rng.uniform(0.1, 2.0, size=(12, 4))
    cfg = AggregationConfig(p=p, normalization=norm)
    got = two_level_aggregate(h, T.Tensor(x), cfg).data
    for v in range(12):
        assert np.allclose(got[v], node_aggregate(h, x, v, cfg), rtol=1e-12, atol=1e-14)


def test_vectorized_geometric_and_adaptive():
    rng = np.random.default_rng(4)
    h = Hypergraph(9, [[0, 1, 2], [2, 3, 4, 5], [5, 6], [1, 6, 7]])
    x = rng.uniform(0.1, 2.0, size=(9, 3))
    cfg = AggregationConfig(geometric=True, p=0.0)
    got = two_level_aggregate(h, T.Tensor(x), cfg).data
    for v in range(8):
        assert np.allclose(got[v], node_aggregate(h, x, v, cfg), rtol=1e-10)
    assert np.array_equal(got[8], np.zeros(3))  # isolated
    net = ImportanceNet(rng=np.random.default_rng(0))
    C = importance_forward(net, h)
    acfg = AggregationConfig(adaptive=True, p=2.0)
    got = two_level_aggregate(h, T.Tensor(x), acfg, T.Tensor(C.reshape(-1, 1))).data
    for v in range(8):
        assert np.allclose(got[v], node_aggregate(h, x, v, acfg, importance=C), rtol=1e-12)


def test_isolated_node_zero_message():
    h = Hypergraph(3, [[0, 1]])
    x = np.ones((3, 2))
    assert np.array_equal(two_level_aggregate(h, T.Tensor(x), AggregationConfig()).data[2], [0.0, 0.0])


def test_importance_positive_and_structural():
    h = Hypergraph(6, [[0, 1, 2], [3, 4, 5]])
    C = importance_forward(ImportanceNet(rng=np.random.default_rng(1)), h)
    assert np.all(np.isfinite(C)) and np.all(C > 0)
    assert np.allclose(C, C[0])  # all nodes share (|N|, |E|) = (2, 1)


def test_sampling_distribution():
    assert np.allclose(sampling_distribution([1.0, 1.0, 2.0], [0, 1, 2]), [0.25, 0.25, 0.5])
    assert np.allclose(sampling_distribution(np.full(5, 3.0), range(5)), 0.2)
    with pytest.raises(EmptyNeighborhood):
        sampling_distribution([1.0], [])


def test_condensed_neighborhood():
    h = Hypergraph(6, [[0, 1, 2, 3, 4, 5]])
    P = np.ones(6)
    assert sample_condensed_neighborhood(h, 0, 0, 10, P, np.random.default_rng(0)) == {1, 2, 3, 4, 5}
    a = sample_condensed_neighborhood(h, 0, 0, 2, P, np.random.default_rng(5))
    b = sample_condensed_neighborhood(h, 0, 0, 2, P, np.random.default_rng(5))
    assert a == b and len(a) == 2 and 0 not in a


def test_concentrated_sampler():
    h = Hypergraph(4, [[0, 1, 2, 3]])
    P = np.array([1.0, 1e4, 1.0, 1.0])
    hits = sum(sample_condensed_neighborhood(h, 0, 0, 1, P, np.random.default_rng(s)) == {1} for s in range(500))
    assert hits / 500 > 0.99


def test_sequential_draw_law():
    # alpha=2 from weights [3, 1, 1]: P(first is in the pair) = 3/5 + 2 * (1/5)(3/4) = 0.9
    h = Hypergraph(4, [[0, 1, 2, 3]])
    P = np.array([1.0, 3.0, 1.0, 1.0])
    rng = np.random.default_rng(0)
    n = 20000
    hits = sum(1 in sample_condensed_neighborhood(h, 0, 0, 2, P, rng) for _ in range(n))
    assert abs(hits / n - 0.9) < 3 * math.sqrt(0.09 / n) + 1e-3


def test_sample_pairs_caps_per_incidence():
    rng = np.random.default_rng(0)
    h = Hypergraph(10, [list(range(8)), [7, 8, 9]])
    tgt, src = sample_pairs(h, 3, None, rng)
    counts = np.bincount(tgt)
    assert counts.max() <= 3
    inc = h.incidence
    full = np.bincount(inc.pair_target, minlength=inc.size)
    assert np.array_equal(np.bincount(tgt, minlength=inc.size), np.minimum(full, 3))


@settings(max_examples=30, deadline=None)
@given(hypergraphs(), st.integers(0, 1000))
def test_p1_is_linear(h, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(h.num_nodes, 2)), rng.normal(size=(h.num_nodes, 2))
    cfg = AggregationConfig()
    f = lambda z: two_level_aggregate(h, T.Tensor(z), cfg).data
    assert np.allclose(f(x + 2 * y), f(x) + 2 * f(y), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(hypergraphs(), st.sampled_from([0.5, 1.0, 2.0, 3.0]), st.floats(-4.0, 4.0))
def test_constant_fixed_point(h, p, c):
    x = np.full((h.num_nodes, 3), c)
    out = two_level_aggregate(h, T.Tensor(x), AggregationConfig(p=p)).data
    has_edges = np.array([h.degree(v) > 0 for v in range(h.num_nodes)])
    assert np.allclose(out[has_edges], c, rtol=1e-12, atol=1e-12)
