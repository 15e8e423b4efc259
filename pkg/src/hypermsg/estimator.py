"""scikit-learn style wrappers.

Node-level estimators take the node feature matrix as ``X`` and the
hypergraph as a keyword argument; rows of ``X`` are nodes. Labels of
``-1`` mark unlabeled nodes, which still take part in message passing.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import tensor as T
from .aggregate import AggregationConfig, two_level_aggregate
from .errors import NoLabeledNodes
from .model import EVAL, ForwardMode, forward, init_params, readout_hypergraph
from .train import Task, TrainConfig, fit_params, labeled_nodes, loss
from .validation import check_dim, check_features, check_hypergraph, check_multilabel, check_node_labels

__all__ = ["HyperMSGClassifier", "HypergraphAggregator", "HypergraphLevelClassifier"]


class _HyperMSGBase(BaseEstimator):
    def __init__(self, hidden_sizes=(16,), p=1.0, alpha=None, adaptive=False, normalization="intra",
                 geometric=False, epochs=250, lr=0.01, weight_decay=5e-4, dropout=0.5,
                 nonlinearity="relu", random_state=0):
        self.hidden_sizes = hidden_sizes
        self.p = p
        self.alpha = alpha
        self.adaptive = adaptive
        self.normalization = normalization
        self.geometric = geometric
        self.epochs = epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.nonlinearity = nonlinearity
        self.random_state = random_state

    def _train_config(self, task) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, weight_decay=self.weight_decay, dropout=self.dropout,
                           hidden_sizes=tuple(self.hidden_sizes), p=self.p, alpha=self.alpha,
                           adaptive=self.adaptive, normalization=self.normalization, geometric=self.geometric,
                           seeds=(int(self.random_state),), task=task, nonlinearity=self.nonlinearity)


class HyperMSGClassifier(ClassifierMixin, _HyperMSGBase):
    """Semi-supervised node classifier.

    ``fit(X, y, hypergraph=h)`` trains on nodes with ``y >= 0``. A 2-D
    ``y`` is treated as a multilabel indicator matrix (rows of ``-1`` are
    unlabeled). Prediction needs the hypergraph as well, which may be a
    larger one containing new nodes (inductive use).
    """

    def fit(self, X, y, hypergraph=None):
        if hypergraph is None:
            raise ValueError("fit needs the hypergraph keyword")
        h = check_hypergraph(hypergraph)
        X = check_features(X, h.num_nodes)
        y_arr = np.asarray(y)
        if y_arr.ndim == 2:
            y_enc = check_multilabel(y_arr, h.num_nodes)
            self.task_ = Task.MULTILABEL
            self.classes_ = np.arange(y_enc.shape[1])
        else:
            y_raw = check_node_labels(y_arr, h.num_nodes)
            mask = y_raw >= 0
            self.classes_ = np.unique(y_raw[mask])
            if self.classes_.size < 2:
                raise ValueError("need at least two classes among labeled nodes")
            y_enc = np.full(h.num_nodes, -1, dtype=np.int64)
            y_enc[mask] = np.searchsorted(self.classes_, y_raw[mask])
            self.task_ = Task.MULTICLASS
        train = labeled_nodes(y_enc, self.task_)
        if train.size == 0:
            raise NoLabeledNodes("no labeled nodes to fit on")
        cfg = self._train_config(self.task_)
        labels = y_enc
        if self.task_ is Task.MULTICLASS:
            labels = np.where(y_enc >= 0, y_enc, 0)  # unlabeled rows are never read by the loss
            params = init_params(X.shape[1], cfg.hidden_sizes, len(self.classes_), cfg.seeds[0],
                                 adaptive=cfg.adaptive, dropout=cfg.dropout, nonlinearity=cfg.nonlinearity,
                                 importance_hidden=cfg.importance_hidden)
        else:
            params = None
        self.params_, self.loss_curve_, _ = fit_params(h, X, labels, train, cfg, cfg.seeds[0], params=params)
        self.aggregation_ = cfg.aggregation()
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X, hypergraph=None):
        check_is_fitted(self, "params_")
        if hypergraph is None:
            raise ValueError("prediction needs the hypergraph keyword")
        h = check_hypergraph(hypergraph)
        X = check_features(X, h.num_nodes)
        check_dim(self.n_features_in_, X.shape[1])
        return forward(h, X, self.params_, self.aggregation_, EVAL).data

    def predict_proba(self, X, hypergraph=None):
        S = self.decision_function(X, hypergraph)
        if self.task_ is Task.MULTILABEL:
            return 1.0 / (1.0 + np.exp(-S))
        z = np.exp(S - S.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def predict(self, X, hypergraph=None):
        S = self.decision_function(X, hypergraph)
        if self.task_ is Task.MULTILABEL:
            return (S > 0).astype(np.int64)
        return self.classes_[S.argmax(axis=1)]

    def score(self, X, y, hypergraph=None, sample_weight=None):
        """Accuracy over labeled nodes (``y >= 0``)."""
        y = np.asarray(y)
        pred = self.predict(X, hypergraph)
        if self.task_ is Task.MULTILABEL:
            keep = np.all(y >= 0, axis=1)
            return float(np.mean(pred[keep] == y[keep]))
        keep = y >= 0
        return float(np.mean(pred[keep] == y[keep]))


class HypergraphAggregator(TransformerMixin, BaseEstimator):
    """Parameter-free message passing: ``z = x + F2(F1(...))`` at every node.

    Repeats ``steps`` times without any weights or normalization.
    """

    def __init__(self, p=1.0, normalization="intra", geometric=False, steps=1):
        self.p = p
        self.normalization = normalization
        self.geometric = geometric
        self.steps = steps

    def fit(self, X, y=None, hypergraph=None):
        X = check_features(X)
        self.n_features_in_ = X.shape[1]
        self.config_ = AggregationConfig(self.p, None, self.normalization, False, self.geometric)
        return self

    def transform(self, X, hypergraph=None):
        check_is_fitted(self, "config_")
        if hypergraph is None:
            raise ValueError("transform needs the hypergraph keyword")
        h = check_hypergraph(hypergraph)
        X = check_features(X, h.num_nodes)
        check_dim(self.n_features_in_, X.shape[1])
        H = T.Tensor(X)
        for _ in range(int(self.steps)):
            H = T.add(H, two_level_aggregate(h, H, self.config_))
        return H.data

    def fit_transform(self, X, y=None, hypergraph=None):
        return self.fit(X, y, hypergraph=hypergraph).transform(X, hypergraph=hypergraph)


class HypergraphLevelClassifier(ClassifierMixin, _HyperMSGBase):
    """Classifies whole hypergraphs: message passing, mean-pool readout, then a dense head.

    ``X`` is a list of per-hypergraph node feature matrices and
    ``hypergraphs`` the matching list of hypergraphs. The message-passing
    layers end in an ``embedding_dim``-wide node embedding.
    """

    def __init__(self, hidden_sizes=(16,), embedding_dim=16, p=1.0, alpha=None, adaptive=False,
                 normalization="intra", geometric=False, epochs=100, lr=0.01, weight_decay=5e-4, dropout=0.5,
                 nonlinearity="relu", random_state=0):
        super().__init__(hidden_sizes, p, alpha, adaptive, normalization, geometric, epochs, lr, weight_decay,
                         dropout, nonlinearity, random_state)
        self.embedding_dim = embedding_dim

    def _embed(self, h, X, mode):
        z = forward(h, X, self.params_, self.aggregation_, mode)
        return T.matmul(readout_hypergraph(z), self.params_.head)

    def fit(self, X, y, hypergraphs=None):
        if hypergraphs is None or len(hypergraphs) != len(X):
            raise ValueError("fit needs one hypergraph per feature matrix")
        hs = [check_hypergraph(h) for h in hypergraphs]
        Xs = [check_features(x, h.num_nodes) for x, h in zip(X, hs)]
        if len({x.shape[1] for x in Xs}) != 1:
            raise ValueError("all feature matrices need the same number of columns")
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes")
        y_enc = np.searchsorted(self.classes_, y)
        cfg = self._train_config(Task.HYPERGRAPH)
        seed = cfg.seeds[0]
        self.aggregation_ = cfg.aggregation()
        self.params_ = init_params(Xs[0].shape[1], cfg.hidden_sizes, self.embedding_dim, seed,
                                   adaptive=cfg.adaptive, dropout=cfg.dropout, nonlinearity=cfg.nonlinearity,
                                   head_dim=len(self.classes_))
        opt = T.Adam(self.params_.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
        self.loss_curve_ = []
        for epoch in range(cfg.epochs):
            with T.Tape() as tape:
                total = None
                for i, (h, x) in enumerate(zip(hs, Xs)):
                    mode = ForwardMode(True, int(np.random.SeedSequence([seed, epoch, i]).generate_state(1)[0]))
                    term = loss(self._embed(h, x, mode), y_enc[i:i + 1], Task.HYPERGRAPH)
                    total = term if total is None else T.add(total, term)
                value = T.scale(total, 1.0 / len(hs))
            tape.backward(value, opt.params.values())
            opt.step()
            self.loss_curve_.append(value.item())
        self.n_features_in_ = Xs[0].shape[1]
        return self

    def decision_function(self, X, hypergraphs=None):
        check_is_fitted(self, "params_")
        if hypergraphs is None or len(hypergraphs) != len(X):
            raise ValueError("need one hypergraph per feature matrix")
        rows = []
        for x, h in zip(X, hypergraphs):
            h = check_hypergraph(h)
            x = check_features(x, h.num_nodes)
            check_dim(self.n_features_in_, x.shape[1])
            rows.append(self._embed(h, x, EVAL).data[0])
        return np.array(rows)

    def predict_proba(self, X, hypergraphs=None):
        S = self.decision_function(X, hypergraphs)
        z = np.exp(S - S.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def predict(self, X, hypergraphs=None):
        return self.classes_[self.decision_function(X, hypergraphs).argmax(axis=1)]

    def score(self, X, y, hypergraphs=None, sample_weight=None):
        return float(np.mean(self.predict(X, hypergraphs) == np.asarray(y)))
