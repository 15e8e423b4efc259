"""Hypergraph data model, neighborhood queries and structural transforms.

A :class:`Hypergraph` is immutable once built. Hyperedges are stored as
sorted tuples of distinct node ids; edge ids are positions in
``hyperedges``. Derived indexes (``node_to_edges``, ``neighbor_index``) and
the flat incidence arrays used by the vectorized aggregation are computed
from the hyperedges alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateNodeInEdge,
    InvalidSplitPlan,
    NodeNotInEdge,
    OutOfRangeNodeId,
    SingletonEdge,
    SizeMismatch,
)

__all__ = [
    "Hypergraph",
    "PermutationMap",
    "SplitPlan",
    "ConnectednessReport",
    "build_hypergraph",
    "intra_edge_neighborhood",
    "global_neighborhood",
    "apply_permutation",
    "split_hyperedge",
    "clique_expansion",
    "connectedness_stats",
    "remove_nodes",
    "induced_subhypergraph",
    "fano_plane",
    "FANO_EDGES",
]


class Hypergraph:
    """Undirected, unweighted hypergraph over nodes ``0 .. num_nodes - 1``.

    Parameters
    ----------
    num_nodes : int
        Size of the node set. Nodes that appear in no hyperedge are allowed
        (isolated nodes).
    hyperedges : iterable of iterables of int
        Member lists. Each must contain at least two distinct, in-range ids.
    """

    def __init__(self, num_nodes: int, hyperedges: Iterable[Iterable[int]]):
        num_nodes = int(num_nodes)
        if num_nodes < 0:
            raise ValueError("num_nodes must be nonnegative")
        edges = []
        for eid, members in enumerate(hyperedges):
            members = [int(m) for m in members]
            for m in members:
                if m < 0 or m >= num_nodes:
                    raise OutOfRangeNodeId(f"node id {m} in hyperedge {eid} outside [0, {num_nodes})")
            unique = sorted(set(members))
            if len(unique) != len(members):
                raise DuplicateNodeInEdge(f"hyperedge {eid} lists a node more than once: {members}")
            if len(unique) < 2:
                raise SingletonEdge(f"hyperedge {eid} has fewer than two nodes")
            edges.append(tuple(unique))
        self.num_nodes = num_nodes
        self.hyperedges: tuple[tuple[int, ...], ...] = tuple(edges)
        self.node_to_edges, self.neighbor_index = _derive_indexes(num_nodes, self.hyperedges)

    @property
    def num_edges(self) -> int:
        return len(self.hyperedges)

    @property
    def total_incidence(self) -> int:
        """N = sum of hyperedge cardinalities."""
        return sum(len(e) for e in self.hyperedges)

    def degree(self, v: int) -> int:
        """|E(v)|."""
        return len(self.node_to_edges[v])

    def __repr__(self):
        return f"Hypergraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"

    def _key(self):
        return self.num_nodes, tuple(sorted(self.hyperedges))

    def __eq__(self, other):
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def check_consistency(self) -> bool:
        """Rebuild the derived indexes and compare with the stored ones."""
        n2e, nbr = _derive_indexes(self.num_nodes, self.hyperedges)
        return n2e == self.node_to_edges and nbr == self.neighbor_index

    def to_dict(self) -> dict:
        return {"num_nodes": self.num_nodes, "hyperedges": [list(e) for e in self.hyperedges]}

    # -- flat arrays for vectorized message passing -------------------------

    @cached_property
    def incidence(self) -> "Incidence":
        return Incidence.from_hypergraph(self)


def _derive_indexes(num_nodes, edges):
    n2e = [[] for _ in range(num_nodes)]
    nbr = [set() for _ in range(num_nodes)]
    for eid, e in enumerate(edges):
        for v in e:
            n2e[v].append(eid)
            nbr[v].update(e)
    for v in range(num_nodes):
        nbr[v].discard(v)
    return tuple(tuple(x) for x in n2e), tuple(frozenset(x) for x in nbr)


@dataclass(frozen=True)
class Incidence:
    """Flat incidence and neighbor-pair arrays.

    ``node[k], edge[k]`` describe incidence ``k`` (node ``node[k]`` belongs
    to hyperedge ``edge[k]``). ``pair_target[q]`` is the incidence that
    receives a message from node ``pair_source[q]``; the sources for
    incidence ``(v, e)`` are exactly ``e - {v}``.
    """

    node: np.ndarray
    edge: np.ndarray
    intra_size: np.ndarray  # |N(v, e)| per incidence
    pair_target: np.ndarray
    pair_source: np.ndarray
    degree: np.ndarray  # |E(v)| per node
    num_neighbors: np.ndarray  # |N(v)| per node

    @classmethod
    def from_hypergraph(cls, h: Hypergraph) -> "Incidence":
        node, edge, targets, sources = [], [], [], []
        offset = 0
        for eid, e in enumerate(h.hyperedges):
            s = len(e)
            members = np.asarray(e, dtype=np.int64)
            node.append(members)
            edge.append(np.full(s, eid, dtype=np.int64))
            a, b = np.nonzero(~np.eye(s, dtype=bool))
            targets.append(offset + a)
            sources.append(members[b])
            offset += s

        def cat(parts):
            return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

        node, edge = cat(node), cat(edge)
        sizes = np.array([len(e) for e in h.hyperedges], dtype=np.int64)
        intra = sizes[edge] - 1 if len(edge) else np.zeros(0, dtype=np.int64)
        degree = np.bincount(node, minlength=h.num_nodes)
        num_nbrs = np.array([len(s) for s in h.neighbor_index], dtype=np.int64)
        return cls(node, edge, intra, cat(targets), cat(sources), degree, num_nbrs)

    @property
    def size(self) -> int:
        return len(self.node)


def build_hypergraph(num_nodes: int, hyperedges: Sequence[Sequence[int]]) -> Hypergraph:
    return Hypergraph(num_nodes, hyperedges)


def _check_node(h: Hypergraph, v: int):
    if not 0 <= v < h.num_nodes:
        raise OutOfRangeNodeId(f"node id {v} outside [0, {h.num_nodes})")


def intra_edge_neighborhood(h: Hypergraph, v: int, e: int) -> frozenset:
    """N(v, e): the members of hyperedge ``e`` other than ``v``."""
    _check_node(h, v)
    members = h.hyperedges[e]
    if v not in members:
        raise NodeNotInEdge(f"node {v} is not a member of hyperedge {e}")
    return frozenset(members) - {v}


def global_neighborhood(h: Hypergraph, v: int) -> frozenset:
    """N(v): union of N(v, e) over the hyperedges incident to ``v``."""
    _check_node(h, v)
    return h.neighbor_index[v]


@dataclass(frozen=True)
class PermutationMap:
    """Node relabeling; ``perm[i]`` is the new id of node ``i``."""

    perm: tuple

    def __init__(self, perm):
        perm = tuple(int(i) for i in perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("perm must be a bijection on [0, n)")
        object.__setattr__(self, "perm", perm)

    def __len__(self):
        return len(self.perm)

    @classmethod
    def identity(cls, n: int) -> "PermutationMap":
        return cls(range(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PermutationMap":
        return cls(rng.permutation(n))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "PermutationMap":
        perm = list(range(n))
        perm[a], perm[b] = perm[b], perm[a]
        return cls(perm)

    def inverse(self) -> "PermutationMap":
        inv = [0] * len(self.perm)
        for i, j in enumerate(self.perm):
            inv[j] = i
        return PermutationMap(inv)

    def apply_rows(self, x: np.ndarray) -> np.ndarray:
        """Move row ``i`` of ``x`` to row ``perm[i]``."""
        x = np.asarray(x)
        out = np.empty_like(x)
        out[np.asarray(self.perm, dtype=np.int64)] = x
        return out


def apply_permutation(h: Hypergraph, x, sigma: PermutationMap):
    """Relabel nodes of ``h`` and rows of ``x`` through ``sigma``."""
    if len(sigma) != h.num_nodes:
        raise SizeMismatch(f"permutation of size {len(sigma)} for {h.num_nodes} nodes")
    if x is not None and np.asarray(x).shape[0] != h.num_nodes:
        raise SizeMismatch(f"feature matrix has {np.asarray(x).shape[0]} rows for {h.num_nodes} nodes")
    p = sigma.perm
    h2 = Hypergraph(h.num_nodes, [[p[v] for v in e] for e in h.hyperedges])
    return h2, (None if x is None else sigma.apply_rows(x))


@dataclass(frozen=True)
class SplitPlan:
    """Split hyperedge ``target_edge`` into ``len(parts)`` hyperedges that all contain ``pivot_node``."""

    target_edge: int
    pivot_node: int
    parts: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(frozenset(int(v) for v in part) | {self.pivot_node}
                                                for part in self.parts))

    def validate(self, h: Hypergraph):
        if not 0 <= self.target_edge < h.num_edges:
            raise InvalidSplitPlan(f"no hyperedge {self.target_edge}")
        members = set(h.hyperedges[self.target_edge])
        if self.pivot_node not in members:
            raise InvalidSplitPlan(f"pivot {self.pivot_node} not in hyperedge {self.target_edge}")
        if len(self.parts) < 2:
            raise InvalidSplitPlan("a split needs at least two parts")
        seen: set = set()
        for part in self.parts:
            rest = part - {self.pivot_node}
            if not rest:
                raise InvalidSplitPlan("every part needs a node besides the pivot")
            if rest & seen:
                raise InvalidSplitPlan("parts overlap outside the pivot")
            seen |= rest
        if seen != members - {self.pivot_node}:
            raise InvalidSplitPlan("parts do not cover the hyperedge")

    @classmethod
    def random(cls, h: Hypergraph, edge: int, pivot: int, r: int, rng: np.random.Generator) -> "SplitPlan":
        """Random partition of ``edge - {pivot}`` into ``r`` nonempty parts."""
        rest = [v for v in h.hyperedges[edge] if v != pivot]
        if not 2 <= r <= len(rest):
            raise InvalidSplitPlan(f"cannot split {len(rest)} non-pivot nodes into {r} parts")
        rest = list(rng.permutation(rest))
        cuts = np.sort(rng.choice(np.arange(1, len(rest)), size=r - 1, replace=False))
        parts = [rest[a:b] for a, b in zip([0, *cuts], [*cuts, len(rest)])]
        return cls(edge, pivot, tuple(parts))


def split_hyperedge(h: Hypergraph, plan: SplitPlan) -> Hypergraph:
    """Remove ``plan.target_edge`` and append one hyperedge per part.

    The new hyperedges get ids ``h.num_edges - 1 .. h.num_edges + r - 2``.
    """
    plan.validate(h)
    edges = [e for i, e in enumerate(h.hyperedges) if i != plan.target_edge]
    edges.extend(sorted(part) for part in plan.parts)
    return Hypergraph(h.num_nodes, edges)


def clique_expansion(h: Hypergraph) -> frozenset:
    """Edge set ``{(u, v) : u < v, u and v share a hyperedge}``."""
    return frozenset(pair for e in h.hyperedges for pair in itertools.combinations(e, 2))


@dataclass
class ConnectednessReport:
    ratios: np.ndarray  # NaN for isolated nodes
    isolated: list
    hist_counts: np.ndarray
    bin_edges: np.ndarray
    mean: float
    median: float
    max: float

    def to_dict(self) -> dict:
        return {
            "ratios": [None if np.isnan(r) else float(r) for r in self.ratios],
            "isolated": list(self.isolated),
            "histogram": {"counts": self.hist_counts.tolist(), "bin_edges": self.bin_edges.tolist()},
            "mean": self.mean,
            "median": self.median,
            "max": self.max,
        }


def connectedness_stats(h: Hypergraph, bins: int = 20) -> ConnectednessReport:
    """Per-node |N(v)| / |E(v)| with a histogram summary."""
    inc = h.incidence
    ratios = np.full(h.num_nodes, np.nan)
    has_edges = inc.degree > 0
    ratios[has_edges] = inc.num_neighbors[has_edges] / inc.degree[has_edges]
    isolated = np.flatnonzero(~has_edges).tolist()
    valid = ratios[has_edges]
    if valid.size:
        counts, edges = np.histogram(valid, bins=bins)
        return ConnectednessReport(ratios, isolated, counts, edges,
                                   float(valid.mean()), float(np.median(valid)), float(valid.max()))
    return ConnectednessReport(ratios, isolated, np.zeros(bins, dtype=np.int64), np.zeros(bins + 1),
                               float("nan"), float("nan"), float("nan"))


def remove_nodes(h: Hypergraph, nodes: Iterable[int]) -> Hypergraph:
    """Drop ``nodes`` from every hyperedge, discarding hyperedges left with fewer than two members.

    Node ids are kept; removed nodes become isolated.
    """
    drop = set(int(v) for v in nodes)
    edges = []
    for e in h.hyperedges:
        kept = [v for v in e if v not in drop]
        if len(kept) >= 2:
            edges.append(kept)
    return Hypergraph(h.num_nodes, edges)


def induced_subhypergraph(h: Hypergraph, nodes: Sequence[int]) -> Hypergraph:
    """Restrict ``h`` to ``nodes`` and relabel them ``0 .. len(nodes) - 1`` in the given order."""
    index = {int(v): i for i, v in enumerate(nodes)}
    edges = []
    for e in h.hyperedges:
        kept = [index[v] for v in e if v in index]
        if len(kept) >= 2:
            edges.append(kept)
    return Hypergraph(len(index), edges)


# Lines of the Fano plane on v1..v7 (ids 0..6).
FANO_EDGES = ((1, 2, 6), (1, 3, 4), (1, 5, 7), (2, 3, 5), (2, 4, 7), (3, 6, 7), (4, 5, 6))


def fano_plane(variant: int = 1) -> Hypergraph:
    """The Fano plane F1, or F2 = F1 with v2 and v3 exchanged."""
    edges = [[v - 1 for v in e] for e in FANO_EDGES]
    h = Hypergraph(7, edges)
    if variant == 1:
        return h
    if variant == 2:
        return apply_permutation(h, None, PermutationMap.transposition(7, 1, 2))[0]
    raise ValueError("variant must be 1 or 2")
