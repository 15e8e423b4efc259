import json

import numpy as np
import pytest

from hypermsg.aggregate import AggregationConfig
from hypermsg.checkpoint import MAGIC, load_checkpoint, loads_state, save_checkpoint
from hypermsg.datasets import (
    Dataset,
    dumps_dataset,
    fano_dataset,
    load_dataset,
    planted_two_block,
    random_uniform,
    save_dataset,
)
from hypermsg.errors import CheckpointFormatError, SizeMismatch
from hypermsg.hypergraph import Hypergraph
from hypermsg.model import init_params


def test_roundtrip(tmp_path):
    ds = planted_two_block(num_nodes=40, edges_per_block=4, seed=1)
    save_dataset(ds, tmp_path / "d.json")
    back = load_dataset(tmp_path / "d.json")
    assert back.hypergraph == ds.hypergraph
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)
    assert all(np.array_equal(back.masks[k], ds.masks[k]) for k in ds.masks)


def test_generators_deterministic():
    assert dumps_dataset(planted_two_block(seed=7)) == dumps_dataset(planted_two_block(seed=7))
    assert dumps_dataset(planted_two_block(seed=7)) != dumps_dataset(planted_two_block(seed=8))
    assert dumps_dataset(random_uniform(seed=3)) == dumps_dataset(random_uniform(seed=3))


def test_planted_shape():
    ds = planted_two_block()
    h = ds.hypergraph
    assert h.num_nodes == 200 and h.num_edges == 40
    assert len(ds.masks["train"]) == 20
    assert np.bincount(ds.labels[ds.masks["train"]]).tolist() == [10, 10]
    # most memberships stay inside the node's block
    inside = sum(np.mean(ds.labels[list(e)] == np.round(ds.labels[list(e)].mean())) for e in h.hyperedges)
    assert inside / h.num_edges > 0.8


def test_random_uniform_sizes():
    ds = random_uniform(num_nodes=20, num_edges=30, k=4, seed=0)
    assert all(len(e) == 4 for e in ds.hypergraph.hyperedges)
    assert ds.hypergraph.num_edges == 30


def test_fano_dataset():
    assert fano_dataset(1).hypergraph.num_edges == 7
    assert fano_dataset(1).features is None
    assert fano_dataset(1).features_or_identity().shape == (7, 7)


def test_validation():
    h = Hypergraph(3, [[0, 1]])
    with pytest.raises(SizeMismatch):
        Dataset(h, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Dataset(h, None, None, {"train": [5]})


def test_checkpoint_roundtrip(tmp_path):
    params = init_params(5, (7,), 3, 0, adaptive=True)
    cfg = AggregationConfig(p=2.0, alpha=4, adaptive=True, normalization="global")
    save_checkpoint(tmp_path / "c.json", params, cfg, seed=0)
    text = (tmp_path / "c.json").read_text()
    assert json.loads(text)["magic"] == MAGIC == "HYPERMSG-CKPT-1"
    back, agg, meta = load_checkpoint(tmp_path / "c.json")
    assert agg == cfg and meta["seed"] == 0
    for name, t in params.parameters().items():
        assert np.array_equal(t.data, back.parameters()[name].data)


def test_checkpoint_rejects_other_files():
    with pytest.raises(CheckpointFormatError):
        loads_state(json.dumps({"magic": "nope", "tensors": {}}))
    with pytest.raises(CheckpointFormatError):
        loads_state(json.dumps({"magic": MAGIC, "tensors": {"w": {"shape": [2, 2], "data": [1.0]}}}))
