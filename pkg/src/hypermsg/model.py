"""The HyperMSG network: stacked two-level message passing with dense layers.

Layer ``l`` computes, for every node ``i``::

    h_i <- h_i^{l-1} + F2({F1(e) : e in E(v_i)})
    h_i^l <- act(W^l (h_i / ||h_i||_2))

The last layer has no activation and returns class scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .aggregate import AggregationConfig, ImportanceNet, two_level_aggregate
from .errors import EmptyEmbedding, ShapeMismatch, UnknownNodeId
from .hypergraph import Hypergraph

__all__ = ["ModelParams", "ForwardMode", "init_params", "forward", "predict_unseen", "readout_hypergraph"]

_ACTIVATIONS = {"relu": T.relu, "tanh": T.tanh}


@dataclass
class ModelParams:
    layer_weights: list
    importance: ImportanceNet | None = None
    dropout_rate: float = 0.5
    nonlinearity: str = "relu"
    head: T.Tensor | None = None  # hypergraph-level classifier on the mean-pooled embedding

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        if self.nonlinearity not in _ACTIVATIONS:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        for a, b in zip(self.layer_weights[:-1], self.layer_weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatch(f"layer shapes {a.shape} and {b.shape} do not chain")

    @property
    def in_dim(self) -> int:
        return self.layer_weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return (self.head if self.head is not None else self.layer_weights[-1]).shape[1]

    def parameters(self) -> dict:
        out = {f"layer{i}.weight": w for i, w in enumerate(self.layer_weights)}
        if self.importance is not None:
            out.update(self.importance.parameters())
        if self.head is not None:
            out["head.weight"] = self.head
        return out

    def state_dict(self) -> dict:
        return {name: t.data.copy() for name, t in self.parameters().items()}

    def load_state_dict(self, state: dict):
        params = self.parameters()
        if set(state) != set(params):
            raise ShapeMismatch(f"parameter names differ: {sorted(set(state) ^ set(params))}")
        for name, arr in state.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != params[name].shape:
                raise ShapeMismatch(f"{name}: expected {params[name].shape}, got {arr.shape}")
            params[name].data = arr.copy()


@dataclass(frozen=True)
class ForwardMode:
    """``training`` turns on dropout and neighbor sampling; both draw from ``seed``."""

    training: bool = False
    seed: int = 0


EVAL = ForwardMode()


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(in_dim: int, hidden_sizes, out_dim: int, seed: int = 0, *, adaptive: bool = False,
                dropout: float = 0.5, nonlinearity: str = "relu", importance_hidden=(8, 8),
                head_dim: int | None = None) -> ModelParams:
    """Glorot-uniform weights for ``in_dim -> hidden... -> out_dim``.

    With ``head_dim`` the layers produce ``out_dim``-dimensional node
    embeddings and a head maps their mean to ``head_dim`` scores.
    """
    rng = np.random.default_rng(seed)
    dims = [int(in_dim), *(int(k) for k in hidden_sizes), int(out_dim)]
    weights = [T.Tensor(_glorot(rng, a, b), requires_grad=True, name=f"layer{i}.weight")
               for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]
    importance = ImportanceNet(importance_hidden, nonlinearity, rng) if adaptive else None
    head = None
    if head_dim is not None:
        head = T.Tensor(_glorot(rng, out_dim, head_dim), requires_grad=True, name="head.weight")
    return ModelParams(weights, importance, dropout, nonlinearity, head)


def forward(h: Hypergraph, x, params: ModelParams, cfg: AggregationConfig, mode: ForwardMode = EVAL,
            aggregate: bool = True) -> T.Tensor:
    """Node scores, ``num_nodes x out_dim``.

    ``aggregate=False`` drops the message-passing term, leaving a per-node
    MLP on each node's own features (the ablation baseline).
    """
    H = T.as_tensor(x)
    if H.shape[0] != h.num_nodes:
        raise ShapeMismatch(f"{H.shape[0]} feature rows for {h.num_nodes} nodes")
    if H.shape[1] != params.in_dim:
        raise ShapeMismatch(f"features have {H.shape[1]} columns, model expects {params.in_dim}")
    rng = np.random.default_rng(mode.seed) if mode.training else None
    C = None
    if cfg.adaptive:
        if params.importance is None:
            raise ValueError("adaptive aggregation needs an importance network")
        C = params.importance.forward(h)
    act = _ACTIVATIONS[params.nonlinearity]
    last = len(params.layer_weights) - 1
    for l, W in enumerate(params.layer_weights):
        if aggregate:
            H = T.add(H, two_level_aggregate(h, H, cfg, C, rng))
        H = T.matmul(T.rowwise_l2_normalize(H), W)
        if l < last:
            H = T.dropout(act(H), params.dropout_rate, rng, mode.training)
    return H


def predict_unseen(h_train: Hypergraph | None, h_full: Hypergraph, x_full, params: ModelParams,
                   cfg: AggregationConfig, unseen) -> np.ndarray:
    """Scores for ``unseen`` nodes, computed in eval mode over the full hypergraph.

    If ``h_train`` shares the full hypergraph's id space it is checked not
    to contain any of the unseen nodes.
    """
    unseen = np.asarray(list(unseen), dtype=np.int64)
    bad = unseen[(unseen < 0) | (unseen >= h_full.num_nodes)]
    if bad.size:
        raise UnknownNodeId(f"node ids {bad.tolist()} not in the full hypergraph")
    if h_train is not None and h_train.num_nodes == h_full.num_nodes:
        leaked = set(unseen.tolist()) & {v for e in h_train.hyperedges for v in e}
        if leaked:
            raise ValueError(f"nodes {sorted(leaked)} appear in the training hypergraph")
    scores = forward(h_full, x_full, params, cfg, EVAL).data
    return scores[unseen]


def readout_hypergraph(z, method: str = "mean") -> T.Tensor:
    """Pool node embeddings into one row vector."""
    z = T.as_tensor(z)
    if z.shape[0] == 0:
        raise EmptyEmbedding("cannot pool an empty embedding")
    if method not in ("mean", "MeanPool"):
        raise ValueError(f"unknown readout {method!r}")
    return T.mean_rows(z)
