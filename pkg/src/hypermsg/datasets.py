"""Canonical JSON dataset format and synthetic generators.

A dataset file is a UTF-8 JSON object::

    {"num_nodes": 5,
     "hyperedges": [[0, 1, 2], [2, 3]],
     "features": [[...], ...],          # optional, row-major
     "labels": [0, 1, -1, ...],         # optional, -1 = unlabeled
     "masks": {"train": [...], "val": [...], "test": [...]}}   # optional
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SizeMismatch
from .hypergraph import Hypergraph, fano_plane

__all__ = ["Dataset", "load_dataset", "save_dataset", "dumps_dataset", "atomic_write",
           "planted_two_block", "random_uniform", "fano_dataset"]


@dataclass
class Dataset:
    hypergraph: Hypergraph
    features: np.ndarray | None = None
    labels: np.ndarray | None = None
    masks: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.hypergraph.num_nodes
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.ndim != 2 or self.features.shape[0] != n:
                raise SizeMismatch(f"features of shape {self.features.shape} for {n} nodes")
            if not np.all(np.isfinite(self.features)):
                raise ValueError("features must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape[0] != n:
                raise SizeMismatch(f"{self.labels.shape[0]} labels for {n} nodes")
        masks = {}
        for name, ids in (self.masks or {}).items():
            ids = np.asarray(ids, dtype=np.int64)
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise ValueError(f"mask {name!r} has ids outside [0, {n})")
            masks[name] = ids
        self.masks = masks

    def features_or_identity(self) -> np.ndarray:
        """Features, or one-hot node indicators when the file has none."""
        return self.features if self.features is not None else np.eye(self.hypergraph.num_nodes)

    def to_dict(self) -> dict:
        out = self.hypergraph.to_dict()
        if self.features is not None:
            out["features"] = self.features.tolist()
        if self.labels is not None:
            out["labels"] = self.labels.tolist()
        if self.masks:
            out["masks"] = {k: v.tolist() for k, v in self.masks.items()}
        return out


def dumps_dataset(ds: Dataset) -> str:
    return json.dumps(ds.to_dict(), separators=(",", ":")) + "\n"


def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(ds: Dataset, path):
    atomic_write(path, dumps_dataset(ds))


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return dataset_from_dict(obj)


def dataset_from_dict(obj: dict) -> Dataset:
    if not isinstance(obj, dict) or "num_nodes" not in obj or "hyperedges" not in obj:
        raise ValueError("dataset JSON needs 'num_nodes' and 'hyperedges'")
    h = Hypergraph(obj["num_nodes"], obj["hyperedges"])
    return Dataset(h, obj.get("features"), obj.get("labels"), obj.get("masks") or {})


# -- generators -------------------------------------------------------------------------


def planted_two_block(num_nodes: int = 200, edges_per_block: int = 20, noise: float = 0.1,
                      labeled_fraction: float = 0.1, dim: int = 64, signal: float = 0.4,
                      memberships: int = 5, seed: int = 0) -> Dataset:
    """Two communities with mostly within-community hyperedges.

    Each node joins ``memberships`` hyperedges; each membership lands in the
    other community's hyperedges with probability ``noise``. Features are
    isotropic Gaussian noise plus a weak class signal of size ``signal``
    along one fixed direction, so single nodes are hard to classify alone
    but their neighborhoods are informative. Masks hold a stratified
    ``labeled_fraction`` of nodes for training and the rest for testing.
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(num_nodes) % 2)
    members = [[] for _ in range(2 * edges_per_block)]
    for v in range(num_nodes):
        chosen = set()
        while len(chosen) < memberships:
            block = labels[v] if rng.random() >= noise else 1 - labels[v]
            chosen.add(int(block * edges_per_block + rng.integers(edges_per_block)))
        for e in chosen:
            members[e].append(v)
    edges = [m for m in members if len(m) >= 2]
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    features = rng.normal(size=(num_nodes, dim)) + signal * np.outer(2 * labels - 1, direction)

    train = []
    for c in (0, 1):
        ids = rng.permutation(np.flatnonzero(labels == c))
        train.extend(ids[: max(1, int(round(labeled_fraction * len(ids))))].tolist())
    train = np.sort(np.array(train))
    test = np.setdiff1d(np.arange(num_nodes), train)
    return Dataset(Hypergraph(num_nodes, edges), features, labels,
                   {"train": train, "val": np.zeros(0, dtype=np.int64), "test": test})


def random_uniform(num_nodes: int = 100, num_edges: int = 50, k: int = 3, dim: int = 8,
                   num_classes: int = 3, seed: int = 0) -> Dataset:
    """Random ``k``-uniform hypergraph with Gaussian features and uniform random labels."""
    if k < 2 or k > num_nodes:
        raise ValueError("need 2 <= k <= num_nodes")
    rng = np.random.default_rng(seed)
    edges = rng.integers(num_nodes, size=(num_edges, k))
    while True:  # redraw rows that repeat a node
        s = np.sort(edges, axis=1)
        bad = np.flatnonzero((s[:, 1:] == s[:, :-1]).any(axis=1))
        if not bad.size:
            break
        edges[bad] = rng.integers(num_nodes, size=(bad.size, k))
    features = rng.normal(size=(num_nodes, dim))
    labels = rng.integers(num_classes, size=num_nodes)
    return Dataset(Hypergraph(num_nodes, edges.tolist()), features, labels)


def fano_dataset(variant: int = 1) -> Dataset:
    return Dataset(fano_plane(variant))
