"""Generalized-mean aggregation within and across hyperedges.

Two implementations live here:

* per-node reference functions (:func:`generalized_mean`,
  :func:`intra_edge_aggregate`, :func:`inter_edge_aggregate`,
  :func:`node_aggregate`) written directly from the formulas on numpy
  arrays; the oracles in :mod:`hypermsg.verify` are built on these;
* :func:`two_level_aggregate`, the vectorized, differentiable version used
  by the model, which aggregates every node of a layer at once.

For power ``p`` the mean is ``phi^-1(sum_i w_i phi(x_i))`` with
``phi(x) = sgn(x)|x|^p``. The geometric mode uses ``phi(x) = log(x + 1e-12)``
and ``phi^-1 = exp``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .errors import EmptyNeighborhood, EmptySet, NodeNotInEdge, ShapeMismatch, ZeroPower
from .hypergraph import Hypergraph, intra_edge_neighborhood

__all__ = [
    "Normalization",
    "AggregationConfig",
    "ImportanceNet",
    "generalized_mean",
    "geometric_mean",
    "split_weight",
    "intra_edge_aggregate",
    "inter_edge_aggregate",
    "node_aggregate",
    "importance_forward",
    "structural_features",
    "sampling_distribution",
    "sample_condensed_neighborhood",
    "sample_pairs",
    "two_level_aggregate",
]

GEOMETRIC_EPS = 1e-12


class Normalization(str, enum.Enum):
    """Prefactor of the intra-edge mean: ``1/|N(v, e)|`` or ``1/|N(v)|``."""

    INTRA_EDGE = "intra"
    GLOBAL_MAIN_TEXT = "global"


@dataclass(frozen=True)
class AggregationConfig:
    """Settings shared by both aggregation levels.

    One power ``p`` serves intra- and inter-edge aggregation. ``alpha`` caps
    the number of sampled neighbors per hyperedge during training
    (``None`` keeps the full neighborhood).
    """

    p: float = 1.0
    alpha: int | None = None
    normalization: Normalization = Normalization.INTRA_EDGE
    adaptive: bool = False
    geometric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if not self.geometric and float(self.p) == 0.0:
            raise ZeroPower("p must be nonzero; use geometric=True for the p -> 0 limit")
        object.__setattr__(self, "p", float(self.p))
        if self.alpha is not None:
            if int(self.alpha) < 1:
                raise ValueError("alpha must be at least 1")
            object.__setattr__(self, "alpha", int(self.alpha))

    def to_dict(self) -> dict:
        return {"p": self.p, "alpha": self.alpha, "normalization": self.normalization.value,
                "adaptive": self.adaptive, "geometric": self.geometric}


# -- reference (per node, numpy) -------------------------------------------------


def _phi(x, p, geometric):
    if geometric:
        return np.log(x + GEOMETRIC_EPS)
    return np.sign(x) * np.abs(x) ** p


def _phi_inv(y, p, geometric):
    if geometric:
        return np.exp(y)
    return np.sign(y) * np.abs(y) ** (1.0 / p)


def _sorted_sum(terms: np.ndarray) -> np.ndarray:
    # value-sorted accumulation: the total does not depend on member order
    terms = np.sort(terms, axis=0)
    acc = terms[0].copy()
    for row in terms[1:]:
        acc += row
    return acc


def generalized_mean(values, weights=None, p: float = 1.0) -> np.ndarray:
    """``phi^-1(sum_i weights_i * phi(values_i))`` with ``phi(x) = sgn(x)|x|^p``.

    ``values`` is ``(n, d)`` (or ``(n,)`` for scalars). Weights default to
    ``1/n`` and are used as given otherwise.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] == 0:
        raise EmptySet("generalized mean of an empty set")
    if float(p) == 0.0:
        raise ZeroPower("p must be nonzero; use geometric_mean for the p -> 0 limit")
    return _weighted_mean(values, weights, float(p), False)


def geometric_mean(values, weights=None) -> np.ndarray:
    """``exp(sum_i weights_i * log(values_i + 1e-12))``; values must be nonnegative."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] == 0:
        raise EmptySet("geometric mean of an empty set")
    return _weighted_mean(values, weights, 0.0, True)


def _weighted_mean(values, weights, p, geometric):
    n = values.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{w.shape[0]} weights for {n} values")
    wshape = (n,) + (1,) * (values.ndim - 1)
    return _phi_inv(_sorted_sum(w.reshape(wshape) * _phi(values, p, geometric)), p, geometric)


def split_weight(h: Hypergraph, v: int, e: int, split_set: Sequence[int],
                 split_graph: Hypergraph | None = None) -> float:
    """``(1/|N(v, e)|) * (sum_m 1/|N(v, e_m)|)^-1`` over hyperedges ``e_m`` in ``split_set``.

    ``e`` is an edge of ``h``; ``split_set`` ids refer to ``split_graph``
    (default ``h``). Compensating a split of ``e`` exactly requires, for each
    neighbor ``v_j``, ``split_set`` = the split edges that contain ``v_j``.
    """
    g = h if split_graph is None else split_graph
    base = len(intra_edge_neighborhood(h, v, e))
    if not split_set:
        raise ValueError("split_set must name at least one hyperedge")
    total = sum(1.0 / len(intra_edge_neighborhood(g, v, m)) for m in split_set)
    return (1.0 / base) / total


def _node_values(x, C, nodes):
    x = np.asarray(x, dtype=np.float64)
    rows = x[nodes]
    if C is not None:
        rows = np.asarray(C, dtype=np.float64).reshape(-1)[nodes][:, None] * rows
    return rows


def intra_edge_aggregate(h: Hypergraph, x, v: int, e: int, cfg: AggregationConfig,
                         importance=None, sample=None, weights: Mapping[int, float] | None = None,
                         return_power: bool = False) -> np.ndarray:
    """F1 for node ``v`` over hyperedge ``e``.

    ``importance`` is an :class:`ImportanceNet` or a per-node array of
    positive weights C (used only when ``cfg.adaptive``). ``sample``
    restricts the neighbors; ``weights`` maps neighbor id to an extra factor
    w_j (default 1). With ``return_power`` the value is returned before the
    final inverse power, i.e. ``phi(F1)``.
    """
    nbrs = intra_edge_neighborhood(h, v, e)
    if sample is not None:
        sample = frozenset(int(s) for s in sample)
        if not sample <= nbrs:
            raise NodeNotInEdge(f"sample {sorted(sample - nbrs)} outside N({v}, {e})")
        nbrs = sample
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[1]
    if not nbrs:
        return np.zeros(d)
    nodes = np.array(sorted(nbrs), dtype=np.int64)
    C = None
    if cfg.adaptive and importance is not None:
        C = importance_forward(importance, h) if isinstance(importance, ImportanceNet) else importance
    vals = _node_values(x, C, nodes)
    if cfg.normalization is Normalization.INTRA_EDGE:
        norm = 1.0 / len(nodes)
    else:
        full = len(intra_edge_neighborhood(h, v, e))
        norm = (full / len(nodes)) / len(h.neighbor_index[v])
    w = np.full(len(nodes), norm)
    if weights is not None:
        w = w * np.array([weights.get(int(j), 1.0) for j in nodes])
    powered = _sorted_sum(w[:, None] * _phi(vals, cfg.p, cfg.geometric))
    return powered if return_power else _phi_inv(powered, cfg.p, cfg.geometric)


def inter_edge_aggregate(per_edge_messages, cfg: AggregationConfig, dim: int | None = None,
                         normalizer: float | None = None) -> np.ndarray:
    """F2: generalized mean of one message per incident hyperedge.

    An empty message set (isolated node) gives the zero vector of length
    ``dim``. ``normalizer`` overrides the default ``1/len(messages)``.
    """
    msgs = np.asarray(per_edge_messages, dtype=np.float64)
    if msgs.size == 0:
        if dim is None:
            raise EmptySet("no messages and no dimension given")
        return np.zeros(dim)
    n = msgs.shape[0]
    c = 1.0 / n if normalizer is None else float(normalizer)
    return _phi_inv(_sorted_sum(c * _phi(msgs, cfg.p, cfg.geometric)), cfg.p, cfg.geometric)


def node_aggregate(h: Hypergraph, x, v: int, cfg: AggregationConfig, importance=None,
                   samples: Mapping[int, frozenset] | None = None) -> np.ndarray:
    """F2 over F1 of every hyperedge incident to ``v`` (the aggregation part of z_v, without x_v)."""
    x = np.asarray(x, dtype=np.float64)
    if cfg.adaptive and isinstance(importance, ImportanceNet):
        importance = importance_forward(importance, h)
    msgs = [intra_edge_aggregate(h, x, v, e, cfg, importance,
                                 None if samples is None else samples.get(e))
            for e in h.node_to_edges[v]]
    return inter_edge_aggregate(msgs, cfg, dim=x.shape[1])


# -- node importance ---------------------------------------------------------------


def structural_features(h: Hypergraph) -> np.ndarray:
    """Per-node ``log1p`` of (|N(v)|, |E(v)|, |N(v)|/|E(v)|); the ratio is 0 for isolated nodes."""
    inc = h.incidence
    n_nbr = inc.num_neighbors.astype(np.float64)
    deg = inc.degree.astype(np.float64)
    ratio = np.divide(n_nbr, deg, out=np.zeros_like(n_nbr), where=deg > 0)
    return np.log1p(np.stack([n_nbr, deg, ratio], axis=1))


_ACTIVATIONS = {"relu": T.relu, "tanh": T.tanh}


class ImportanceNet:
    """Small MLP mapping a node's structural features to a positive weight C.

    Two hidden layers, then softplus. The output bias starts at
    ``log(e - 1)`` so that a fresh network gives weights near 1.
    """

    def __init__(self, hidden=(8, 8), activation: str = "relu", rng: np.random.Generator | None = None):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.hidden = tuple(int(k) for k in hidden)
        self.activation = activation
        sizes = (3, *self.hidden, 1)
        self.weights = [T.Tensor(_glorot(rng, a, b), requires_grad=True, name=f"importance.w{i}")
                        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.biases = [T.Tensor(np.zeros((1, b)), requires_grad=True, name=f"importance.b{i}")
                       for i, b in enumerate(sizes[1:])]
        self.biases[-1].data[:] = np.log(np.e - 1.0)

    def parameters(self) -> dict:
        out = {}
        for w, b in zip(self.weights, self.biases):
            out[w.name] = w
            out[b.name] = b
        return out

    def forward(self, h: Hypergraph) -> T.Tensor:
        """Column tensor (num_nodes x 1) of weights C > 0."""
        act = _ACTIVATIONS[self.activation]
        z = T.Tensor(structural_features(h))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = T.add(T.matmul(z, w), b)
            if i < len(self.weights) - 1:
                z = act(z)
        return T.add(T.softplus(z), 1e-9)


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def importance_forward(net: ImportanceNet, h: Hypergraph) -> np.ndarray:
    """Per-node weights C as a flat array (values only)."""
    return net.forward(h).data[:, 0].copy()


# -- sampling ------------------------------------------------------------------------


def sampling_distribution(C, neighborhood) -> np.ndarray:
    """``P_j = C_j / sum C`` over ``neighborhood`` taken in ascending node order."""
    nodes = sorted(int(j) for j in neighborhood)
    if not nodes:
        raise EmptyNeighborhood("cannot sample from an empty neighborhood")
    c = np.asarray(C, dtype=np.float64).reshape(-1)[nodes]
    if np.any(c <= 0):
        raise ValueError("importance weights must be positive")
    return c / c.sum()


def sample_condensed_neighborhood(h: Hypergraph, v: int, e: int, alpha: int, P,
                                  rng: np.random.Generator) -> frozenset:
    """Draw ``min(alpha, |N(v, e)|)`` distinct neighbors, successively, with probability ∝ ``P``.

    ``P`` is a per-node array of positive weights (only ratios matter).
    Uses exponential races (Gumbel top-k), which reproduces sequential
    draws with renormalization.
    """
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    nodes = np.array(sorted(intra_edge_neighborhood(h, v, e)), dtype=np.int64)
    if alpha >= len(nodes):
        return frozenset(nodes.tolist())
    w = np.asarray(P, dtype=np.float64).reshape(-1)[nodes]
    keys = np.log(w) + rng.gumbel(size=len(nodes))
    chosen = np.argsort(-keys, kind="stable")[:alpha]
    return frozenset(nodes[chosen].tolist())


def sample_pairs(h: Hypergraph, alpha: int, C, rng: np.random.Generator):
    """Vectorized condensed neighborhoods for every incidence at once.

    Returns ``(pair_target, pair_source)`` restricted to at most ``alpha``
    sources per incidence, drawn as in :func:`sample_condensed_neighborhood`.
    """
    inc = h.incidence
    tgt, src = inc.pair_target, inc.pair_source
    if alpha >= (inc.intra_size.max() if inc.size else 0):
        return tgt, src
    w = np.ones(h.num_nodes) if C is None else np.asarray(C, dtype=np.float64).reshape(-1)
    keys = np.log(w[src]) + rng.gumbel(size=len(src))
    order = np.lexsort((-keys, tgt))
    sorted_tgt = tgt[order]
    first = np.searchsorted(sorted_tgt, sorted_tgt, side="left")
    rank = np.arange(len(order)) - first
    keep = np.sort(order[rank < alpha])
    return tgt[keep], src[keep]


# -- vectorized layer -----------------------------------------------------------------


def two_level_aggregate(h: Hypergraph, H: T.Tensor, cfg: AggregationConfig, C: T.Tensor | None = None,
                        rng: np.random.Generator | None = None) -> T.Tensor:
    """F2(F1(...)) at every node, as a differentiable ``(num_nodes, d)`` tensor.

    ``C`` (``num_nodes x 1``) scales each sender's message when given.
    Neighbors are subsampled to ``cfg.alpha`` per hyperedge only when ``rng``
    is supplied (training). Isolated nodes receive the zero vector.

    Because both levels use the same power, ``phi(F1)`` feeds the outer mean
    directly instead of applying ``phi^-1`` and then ``phi`` again.
    """
    inc = h.incidence
    n = h.num_nodes
    if H.shape[0] != n:
        raise ShapeMismatch(f"{H.shape[0]} feature rows for {n} nodes")
    if cfg.geometric and np.any(H.data < 0):
        raise ValueError("geometric aggregation needs nonnegative inputs")
    msg = H if C is None else T.mul(H, C)
    Y = T.log(msg, GEOMETRIC_EPS) if cfg.geometric else T.signed_pow(msg, cfg.p)

    if rng is not None and cfg.alpha is not None:
        weights = None if C is None else C.data[:, 0]
        tgt, src = sample_pairs(h, cfg.alpha, weights, rng)
    else:
        tgt, src = inc.pair_target, inc.pair_source
    counts = np.bincount(tgt, minlength=inc.size).astype(np.float64)
    counts[counts == 0] = 1.0  # unreachable: every hyperedge has a second member
    if cfg.normalization is Normalization.INTRA_EDGE:
        norm = 1.0 / counts
    else:
        norm = (inc.intra_size / counts) / inc.num_neighbors[inc.node]

    S = T.segment_sum(T.gather_rows(Y, src), tgt, inc.size)
    F1p = T.mul(S, norm[:, None])
    deg = inc.degree.astype(np.float64)
    inv_deg = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    F2p = T.mul(T.segment_sum(F1p, inc.node, n), inv_deg[:, None])
    out = T.exp(F2p) if cfg.geometric else T.signed_pow(F2p, 1.0 / cfg.p)
    if cfg.geometric:
        out = T.mul(out, (deg > 0).astype(np.float64)[:, None])
    return out
