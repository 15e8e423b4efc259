import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypermsg import tensor as T
from hypermsg.aggregate import AggregationConfig
from hypermsg.errors import EmptyEmbedding, ShapeMismatch, UnknownNodeId
from hypermsg.hypergraph import Hypergraph, PermutationMap, apply_permutation
from hypermsg.model import EVAL, ForwardMode, forward, init_params, predict_unseen, readout_hypergraph
from hypermsg.train import loss

from test_hypergraph import hypergraphs


def test_output_shape():
    rng = np.random.default_rng(0)
    h = Hypergraph(40, [rng.choice(40, 4, replace=False) for _ in range(15)])
    params = init_params(33, (16,), 7, 0)
    assert forward(h, rng.normal(size=(40, 33)), params, AggregationConfig()).shape == (40, 7)


def test_zero_input_zero_weights():
    h = Hypergraph(4, [[0, 1, 2], [2, 3]])
    params = init_params(3, (5,), 2, 0)
    for w in params.layer_weights:
        w.data[:] = 0.0
    out = forward(h, np.zeros((4, 3)), params, AggregationConfig())
    assert np.array_equal(out.data, np.zeros((4, 2)))


def test_shape_errors():
    h = Hypergraph(4, [[0, 1, 2]])
    params = init_params(3, (5,), 2, 0)
    with pytest.raises(ShapeMismatch):
        forward(h, np.zeros((5, 3)), params, AggregationConfig())
    with pytest.raises(ShapeMismatch):
        forward(h, np.zeros((4, 2)), params, AggregationConfig())


@settings(max_examples=25, deadline=None)
@given(hypergraphs(), st.integers(0, 10_000), st.booleans(), st.sampled_from([1.0, 2.0]))
def test_equivariance_exact(h, seed, adaptive, p):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(h.num_nodes, 3))
    params = init_params(3, (4,), 2, seed, adaptive=adaptive)
    cfg = AggregationConfig(p=p, adaptive=adaptive)
    sigma = PermutationMap.random(h.num_nodes, rng)
    h2, x2 = apply_permutation(h, x, sigma)
    base = forward(h, x, params, cfg).data
    assert np.array_equal(forward(h2, x2, params, cfg).data, sigma.apply_rows(base))


def test_eval_mode_deterministic_and_training_mode_seeded():
    rng = np.random.default_rng(0)
    h = Hypergraph(10, [rng.choice(10, 4, replace=False) for _ in range(6)])
    x = rng.normal(size=(10, 3))
    params = init_params(3, (8,), 2, 0)
    cfg = AggregationConfig(alpha=1)
    assert np.array_equal(forward(h, x, params, cfg).data, forward(h, x, params, cfg).data)
    a = forward(h, x, params, cfg, ForwardMode(True, 3)).data
    b = forward(h, x, params, cfg, ForwardMode(True, 3)).data
    c = forward(h, x, params, cfg, ForwardMode(True, 4)).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_isolated_node_uses_own_features():
    h = Hypergraph(4, [[0, 1, 2]])
    x = np.random.default_rng(0).normal(size=(4, 3))
    params = init_params(3, (), 2, 0)  # single linear layer
    out = forward(h, x, params, AggregationConfig()).data
    xn = x[3] / np.linalg.norm(x[3])
    assert np.allclose(out[3], xn @ params.layer_weights[0].data)


def test_ablation_ignores_structure():
    x = np.random.default_rng(0).normal(size=(5, 3))
    params = init_params(3, (4,), 2, 0)
    a = forward(Hypergraph(5, [[0, 1, 2]]), x, params, AggregationConfig(), aggregate=False).data
    b = forward(Hypergraph(5, [[3, 4]]), x, params, AggregationConfig(), aggregate=False).data
    assert np.array_equal(a, b)


def test_full_loss_gradient(eight):
    h, x, y = eight
    for adaptive in (False, True):
        params = init_params(5, (6,), 3, 0, adaptive=adaptive, dropout=0.0)
        cfg = AggregationConfig(p=2.0, adaptive=adaptive)
        rep = T.finite_diff_check(lambda: loss(forward(h, T.Tensor(x), params, cfg, EVAL), y, "multiclass"),
                                  params.parameters(), step=1e-5, tolerance=1e-4)
        assert rep.passed, rep.worst


def test_state_dict_roundtrip():
    params = init_params(4, (6,), 3, 0, adaptive=True, head_dim=2)
    other = init_params(4, (6,), 3, 1, adaptive=True, head_dim=2)
    other.load_state_dict(params.state_dict())
    for name, t in params.parameters().items():
        assert np.array_equal(t.data, other.parameters()[name].data)
    with pytest.raises(ShapeMismatch):
        init_params(4, (7,), 3, 0).load_state_dict(init_params(4, (6,), 3, 0).state_dict())


def test_predict_unseen_twin_rows():
    # nodes 0 and 3 are structural twins with equal features
    h = Hypergraph(6, [[0, 1, 2], [3, 1, 2], [4, 5]])
    x = np.random.default_rng(0).normal(size=(6, 3))
    x[3] = x[0]
    params = init_params(3, (4,), 2, 0)
    s = predict_unseen(None, h, x, params, AggregationConfig(), [0, 3])
    assert np.array_equal(s[0], s[1])
    with pytest.raises(UnknownNodeId):
        predict_unseen(None, h, x, params, AggregationConfig(), [6])
    with pytest.raises(ValueError):
        predict_unseen(h, h, x, params, AggregationConfig(), [0])


def test_readout():
    v = np.array([[1.0, -2.0, 3.0]])
    assert np.array_equal(readout_hypergraph(np.repeat(v, 4, axis=0)).data, v)
    assert np.array_equal(readout_hypergraph([[0.0, 2.0], [2.0, 0.0]]).data, [[1.0, 1.0]])
    z = np.random.default_rng(0).normal(size=(6, 2))
    assert np.allclose(readout_hypergraph(z[::-1]).data, readout_hypergraph(z).data, atol=1e-15)
    with pytest.raises(EmptyEmbedding):
        readout_hypergraph(np.zeros((0, 2)))
