import numpy as np
import pytest
from sklearn.base import clone

from hypermsg.datasets import planted_two_block, random_uniform
from hypermsg.errors import DimMismatch
from hypermsg.estimator import HypergraphAggregator, HypergraphLevelClassifier, HyperMSGClassifier
from hypermsg.hypergraph import Hypergraph


@pytest.fixture(scope="module")
def planted():
    ds = planted_two_block(seed=0)
    y = np.full(200, -1)
    y[ds.masks["train"]] = ds.labels[ds.masks["train"]]
    return ds, y


def test_params_roundtrip():
    clf = HyperMSGClassifier(p=2.0, alpha=4, hidden_sizes=(8,))
    assert clf.get_params()["p"] == 2.0
    other = clone(clf).set_params(p=3.0)
    assert other.p == 3.0 and clf.p == 2.0


def test_fit_predict(planted):
    ds, y = planted
    clf = HyperMSGClassifier(epochs=100).fit(ds.features, y, hypergraph=ds.hypergraph)
    test = ds.masks["test"]
    pred = clf.predict(ds.features, hypergraph=ds.hypergraph)
    assert np.mean(pred[test] == ds.labels[test]) > 0.8
    proba = clf.predict_proba(ds.features, hypergraph=ds.hypergraph)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert set(clf.classes_) == {0, 1}


def test_string_like_class_ids(planted):
    ds, y = planted
    y2 = np.where(y >= 0, y + 10, -1)
    clf = HyperMSGClassifier(epochs=5).fit(ds.features, y2, hypergraph=ds.hypergraph)
    assert set(np.unique(clf.predict(ds.features, hypergraph=ds.hypergraph))) <= {10, 11}


def test_input_validation(planted):
    ds, y = planted
    with pytest.raises(ValueError):
        HyperMSGClassifier().fit(ds.features, y)
    with pytest.raises(ValueError):
        HyperMSGClassifier().fit(ds.features[:10], y, hypergraph=ds.hypergraph)
    clf = HyperMSGClassifier(epochs=2).fit(ds.features, y, hypergraph=ds.hypergraph)
    with pytest.raises(DimMismatch):
        clf.predict(ds.features[:, :5], hypergraph=ds.hypergraph)


def test_multilabel(planted):
    ds, _ = planted
    Y = np.stack([ds.labels, 1 - ds.labels], axis=1)
    Y[ds.masks["test"]] = -1
    clf = HyperMSGClassifier(epochs=50).fit(ds.features, Y, hypergraph=ds.hypergraph)
    pred = clf.predict(ds.features, hypergraph=ds.hypergraph)
    assert pred.shape == (200, 2)


def test_aggregator_transform():
    h = Hypergraph(3, [[0, 1], [1, 2]])
    X = np.array([[1.0], [2.0], [3.0]])
    z = HypergraphAggregator().fit_transform(X, hypergraph=h)
    assert np.allclose(z[:, 0], [3.0, 4.0, 5.0])


def test_hypergraph_level():
    gs = [random_uniform(20, 10, 3, 4, 2, seed=s) for s in range(8)]
    X = [g.features + 2.0 * (s % 2) for s, g in enumerate(gs)]
    H = [g.hypergraph for g in gs]
    y = [s % 2 for s in range(8)]
    clf = HypergraphLevelClassifier(epochs=40).fit(X, y, hypergraphs=H)
    assert clf.score(X, y, hypergraphs=H) == 1.0
    assert clf.predict_proba(X, hypergraphs=H).shape == (8, 2)
