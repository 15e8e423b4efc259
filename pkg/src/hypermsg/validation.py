"""Input checks shared by the estimator API and the command line."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DimMismatch, SizeMismatch
from .hypergraph import Hypergraph

__all__ = ["check_hypergraph", "check_features", "check_node_labels", "check_multilabel", "check_dim"]


def check_hypergraph(h) -> Hypergraph:
    """Accept a :class:`Hypergraph`, a ``(num_nodes, hyperedges)`` pair or a dataset-style dict."""
    if isinstance(h, Hypergraph):
        return h
    if isinstance(h, dict):
        return Hypergraph(h["num_nodes"], h["hyperedges"])
    if isinstance(h, (tuple, list)) and len(h) == 2:
        return Hypergraph(*h)
    raise TypeError(f"cannot interpret {type(h).__name__} as a hypergraph")


def check_features(X, num_nodes: int | None = None) -> np.ndarray:
    """Finite float64 matrix with one row per node."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if num_nodes is not None and X.shape[0] != num_nodes:
        raise SizeMismatch(f"{X.shape[0]} feature rows for {num_nodes} nodes")
    return X


def check_node_labels(y, num_nodes: int) -> np.ndarray:
    """Integer class ids, ``-1`` for unlabeled nodes."""
    y = check_array(y, ensure_2d=False, dtype=None)
    if y.ndim != 1:
        raise ValueError("node labels must be one-dimensional; use the multilabel path for label matrices")
    if y.shape[0] != num_nodes:
        raise SizeMismatch(f"{y.shape[0]} labels for {num_nodes} nodes")
    if not np.all(np.equal(np.mod(y, 1), 0)):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if np.any(y < -1):
        raise ValueError("labels below -1 are not allowed")
    return y


def check_multilabel(Y, num_nodes: int) -> np.ndarray:
    """0/1 indicator matrix; a row of ``-1`` marks an unlabeled node."""
    Y = check_array(Y, dtype=np.int64, ensure_2d=True)
    if Y.shape[0] != num_nodes:
        raise SizeMismatch(f"{Y.shape[0]} label rows for {num_nodes} nodes")
    if not np.isin(Y, (-1, 0, 1)).all():
        raise ValueError("multilabel targets must be 0/1 (or -1 for unlabeled rows)")
    return Y


def check_dim(expected: int, got: int, what: str = "features"):
    if expected != got:
        raise DimMismatch(f"model expects {expected}-dimensional {what}, data has {got}")
