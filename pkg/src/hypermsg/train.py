"""Semi-supervised training, evaluation, data splits and the inductive protocol."""

from __future__ import annotations

import enum
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .aggregate import AggregationConfig
from .errors import InsufficientLabels, NoLabeledNodes, ShapeMismatch
from .hypergraph import Hypergraph, induced_subhypergraph
from .metrics import accuracy, average_precision, macro_average_precision, macro_roc_auc, roc_auc
from .model import EVAL, ForwardMode, ModelParams, forward, init_params, predict_unseen

logger = logging.getLogger(__name__)

__all__ = [
    "Task",
    "TrainConfig",
    "MetricsReport",
    "SeedRun",
    "InductiveSplit",
    "ScalingReport",
    "num_outputs",
    "loss",
    "fit_params",
    "evaluate",
    "make_splits",
    "inductive_split",
    "train_model",
    "train_inductive",
    "runtime_scaling_probe",
]


class Task(str, enum.Enum):
    MULTICLASS = "multiclass"
    BINARY = "binary"
    MULTILABEL = "multilabel"
    HYPERGRAPH = "hypergraph"


PRIMARY_METRIC = {Task.MULTICLASS: "accuracy", Task.BINARY: "auc_roc",
                  Task.MULTILABEL: "average_precision", Task.HYPERGRAPH: "auc_roc"}


@dataclass
class TrainConfig:
    """Training and aggregation settings; defaults follow the node-classification setup."""

    epochs: int = 250
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    hidden_sizes: tuple = (16,)
    p: float = 1.0
    alpha: int | None = None
    adaptive: bool = False
    normalization: str = "intra"
    geometric: bool = False
    seeds: tuple = (0,)
    train_ratio: float | None = None  # None: use masks shipped with the data
    val_ratio: float = 0.0
    task: Task = Task.MULTICLASS
    nonlinearity: str = "relu"
    importance_hidden: tuple = (8, 8)
    aggregate: bool = True
    val_every: int = 10

    def __post_init__(self):
        self.task = Task(self.task)
        self.hidden_sizes = tuple(int(k) for k in self.hidden_sizes)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.importance_hidden = tuple(int(k) for k in self.importance_hidden)
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.train_ratio is not None and not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must lie in (0, 1)")
        if not 0.0 <= self.val_ratio < 1.0:
            raise ValueError("val_ratio must lie in [0, 1)")
        self.aggregation()  # validates p / alpha

    def aggregation(self) -> AggregationConfig:
        return AggregationConfig(self.p, self.alpha, self.normalization, self.adaptive, self.geometric)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["task"] = self.task.value
        out["hidden_sizes"] = list(self.hidden_sizes)
        out["seeds"] = list(self.seeds)
        out["importance_hidden"] = list(self.importance_hidden)
        return out


@dataclass
class SeedRun:
    seed: int
    params: ModelParams
    masks: dict
    metrics: dict
    loss_curve: list
    val_curve: list
    seconds: float


@dataclass
class MetricsReport:
    task: str
    metric_name: str
    seeds: list
    values: list
    wall_clock_s: float
    loss_curves: list = field(default_factory=list)
    val_curves: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    runs: list = field(default_factory=list, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    def to_dict(self) -> dict:
        out = {"task": self.task, "seeds": list(self.seeds), "metric_name": self.metric_name,
               "values": [float(v) for v in self.values], "mean": self.mean, "std": self.std,
               "wall_clock_s": self.wall_clock_s, "loss_curves": self.loss_curves,
               "val_curves": self.val_curves}
        out.update(self.extra)
        return out


# -- targets and loss --------------------------------------------------------------


def num_outputs(labels, task: Task) -> int:
    task = Task(task)
    labels = np.asarray(labels)
    if task is Task.MULTICLASS:
        return int(labels.max()) + 1
    if task is Task.BINARY:
        return 1
    if task is Task.MULTILABEL:
        return labels.shape[1]
    return int(labels.max()) + 1


def labeled_nodes(labels, task: Task) -> np.ndarray:
    labels = np.asarray(labels)
    if Task(task) is Task.MULTILABEL:
        return np.flatnonzero(np.all(labels >= 0, axis=1))
    return np.flatnonzero(labels >= 0)


def loss(scores: T.Tensor, labels, task) -> T.Tensor:
    """Mean loss over the given rows: softmax cross-entropy for multi-class, logistic otherwise."""
    task = Task(task)
    labels = np.asarray(labels)
    if scores.shape[0] == 0 or labels.shape[0] == 0:
        raise NoLabeledNodes("loss needs at least one labeled row")
    if task in (Task.MULTICLASS, Task.HYPERGRAPH):
        return T.softmax_cross_entropy(scores, labels)
    if task is Task.BINARY:
        return T.sigmoid_cross_entropy(scores, labels.reshape(-1, 1))
    return T.sigmoid_cross_entropy(scores, labels)


def _epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def fit_params(h: Hypergraph, x, labels, train_idx, cfg: TrainConfig, seed: int = 0,
               val_idx=None, params: ModelParams | None = None):
    """Full-batch training for ``cfg.epochs`` epochs; returns ``(params, loss_curve, val_curve)``."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise NoLabeledNodes("no training nodes")
    agg = cfg.aggregation()
    if params is None:
        params = init_params(x.shape[1], cfg.hidden_sizes, num_outputs(labels, cfg.task), seed,
                             adaptive=cfg.adaptive, dropout=cfg.dropout, nonlinearity=cfg.nonlinearity,
                             importance_hidden=cfg.importance_hidden)
    opt = T.Adam(params.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    X = T.Tensor(x)
    loss_curve, val_curve = [], []
    for epoch in range(cfg.epochs):
        mode = ForwardMode(training=True, seed=_epoch_seed(seed, epoch))
        with T.Tape() as tape:
            scores = forward(h, X, params, agg, mode, aggregate=cfg.aggregate)
            value = loss(T.gather_rows(scores, train_idx), labels[train_idx], cfg.task)
        tape.backward(value, opt.params.values())
        opt.step()
        loss_curve.append(value.item())
        if val_idx is not None and len(val_idx) and ((epoch + 1) % cfg.val_every == 0 or epoch + 1 == cfg.epochs):
            m = evaluate(params, h, x, labels, val_idx, cfg.task, agg, aggregate=cfg.aggregate)
            val_curve.append([epoch + 1, m[PRIMARY_METRIC[cfg.task]]])
            logger.debug("epoch %d loss %.4f val %.4f", epoch + 1, value.item(), val_curve[-1][1])
    return params, loss_curve, val_curve


def evaluate(params: ModelParams, h: Hypergraph, x, labels, idx, task, cfg: AggregationConfig,
             aggregate: bool = True, scores: np.ndarray | None = None) -> dict:
    """Eval-mode metrics on nodes ``idx``: accuracy, AUC-ROC and average precision as the task allows."""
    task = Task(task)
    idx = np.asarray(idx, dtype=np.int64)
    labels = np.asarray(labels)
    if scores is None:
        scores = forward(h, x, params, cfg, EVAL, aggregate=aggregate).data
    return score_metrics(scores[idx], labels[idx], task)


def score_metrics(S: np.ndarray, y: np.ndarray, task: Task) -> dict:
    task = Task(task)
    if len(y) == 0:
        return {}
    if task in (Task.MULTICLASS, Task.HYPERGRAPH):
        z = S - S.max(axis=1, keepdims=True)
        prob = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        out = {"accuracy": accuracy(y, S.argmax(axis=1))}
        if S.shape[1] == 2:
            out["auc_roc"] = roc_auc(y == 1, prob[:, 1])
            out["average_precision"] = average_precision(y == 1, prob[:, 1])
        else:
            onehot = np.eye(S.shape[1])[y]
            out["auc_roc"] = macro_roc_auc(onehot, prob)
        return out
    if task is Task.BINARY:
        s = S[:, 0]
        return {"accuracy": accuracy(y, (s > 0).astype(int)), "auc_roc": roc_auc(y, s),
                "average_precision": average_precision(y, s)}
    return {"average_precision": macro_average_precision(y, S), "auc_roc": macro_roc_auc(y, S)}


# -- splits --------------------------------------------------------------------------


def _stratified_order(labels, nodes, task, rng):
    """Labeled nodes ordered so that every prefix is close to class-proportional."""
    nodes = np.asarray(nodes)
    if Task(task) is Task.MULTILABEL:
        return rng.permutation(nodes)
    keys = np.empty(len(nodes))
    y = np.asarray(labels)[nodes]
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        members = rng.permutation(members)
        keys[members] = (np.arange(len(members)) + rng.random(len(members))) / len(members)
    return nodes[np.argsort(keys, kind="stable")]


def _check_classes(labels, nodes, task, need: int):
    if Task(task) is Task.MULTILABEL:
        if len(nodes) < need:
            raise InsufficientLabels(f"{len(nodes)} labeled nodes, need {need}")
        return
    y = np.asarray(labels)[nodes]
    cls, counts = np.unique(y, return_counts=True)
    if len(nodes) == 0:
        raise InsufficientLabels("no labeled nodes")
    low = cls[counts < need]
    if low.size:
        raise InsufficientLabels(f"classes {low.tolist()} have fewer than {need} labeled nodes")


def make_splits(labels, ratio: float, seed: int = 0, task=Task.MULTICLASS, val_ratio: float = 0.0) -> dict:
    """Stratified random train / val / test node ids.

    ``ratio`` and ``val_ratio`` are fractions of the labeled nodes; the
    remainder is the test set.
    """
    nodes = labeled_nodes(labels, task)
    _check_classes(labels, nodes, task, 2)
    rng = np.random.default_rng(seed)
    order = _stratified_order(labels, nodes, task, rng)
    n_train = max(1, int(round(ratio * len(order))))
    n_val = int(round(val_ratio * len(order)))
    if n_train + n_val >= len(order):
        raise InsufficientLabels("split leaves no test nodes")
    return {"train": np.sort(order[:n_train]), "val": np.sort(order[n_train:n_train + n_val]),
            "test": np.sort(order[n_train + n_val:])}


@dataclass
class InductiveSplit:
    """Seen/unseen partition.

    ``h_train`` holds only seen nodes, relabeled ``0 .. len(seen) - 1`` in
    the order of ``seen``; ``masks`` use original ids and ``train_masks``
    use the relabeled ids.
    """

    h_train: Hypergraph
    h_full: Hypergraph
    seen: np.ndarray
    masks: dict
    train_masks: dict

    @property
    def unseen(self) -> np.ndarray:
        return self.masks["test"]


def inductive_split(h: Hypergraph, labels, seed: int = 0, ratios=(1, 3, 1), task=Task.MULTICLASS) -> InductiveSplit:
    """Train / seen-validation / unseen-test split; unseen nodes are cut out of the training hypergraph."""
    nodes = labeled_nodes(labels, task)
    _check_classes(labels, nodes, task, 3)
    rng = np.random.default_rng(seed)
    order = _stratified_order(labels, nodes, task, rng)
    total = float(sum(ratios))
    n_train = int(round(ratios[0] / total * len(order)))
    n_test = int(round(ratios[2] / total * len(order)))
    train = np.sort(order[:n_train])
    test = np.sort(order[n_train:n_train + n_test])
    val = np.sort(order[n_train + n_test:])
    seen = np.setdiff1d(np.arange(h.num_nodes), test)
    h_train = induced_subhypergraph(h, seen)
    local = np.full(h.num_nodes, -1, dtype=np.int64)
    local[seen] = np.arange(len(seen))
    masks = {"train": train, "val": val, "test": test}
    train_masks = {"train": local[train], "val": local[val]}
    return InductiveSplit(h_train, h, seen, masks, train_masks)


class AccessLog:
    """Records which original node ids had features or structure handed to training."""

    def __init__(self, forbidden):
        self.forbidden = set(int(v) for v in forbidden)
        self.touched: set = set()

    def take_rows(self, x, ids):
        ids = np.asarray(ids, dtype=np.int64)
        self.touched.update(ids.tolist())
        return np.asarray(x)[ids]

    def structure(self, h_local: Hypergraph, local_to_global):
        local_to_global = np.asarray(local_to_global)
        for e in h_local.hyperedges:
            self.touched.update(local_to_global[list(e)].tolist())
        return h_local

    @property
    def violations(self) -> int:
        return len(self.touched & self.forbidden)


# -- experiment drivers ---------------------------------------------------------------


def run_seed(h: Hypergraph, x, labels, cfg: TrainConfig, seed: int, masks: dict | None = None) -> SeedRun:
    start = time.perf_counter()
    if masks is None:
        if cfg.train_ratio is None:
            raise ValueError("need masks or a train_ratio")
        masks = make_splits(labels, cfg.train_ratio, seed, cfg.task, cfg.val_ratio)
    masks = {k: np.asarray(v, dtype=np.int64) for k, v in masks.items()}
    params, curve, val_curve = fit_params(h, x, labels, masks["train"], cfg, seed, masks.get("val"))
    metrics = evaluate(params, h, x, labels, masks["test"], cfg.task, cfg.aggregation(), cfg.aggregate)
    return SeedRun(seed, params, masks, metrics, curve, val_curve, time.perf_counter() - start)


def train_model(h: Hypergraph, x, labels, cfg: TrainConfig, masks: dict | None = None, jobs: int = 1):
    """Train once per seed and report the test metric; returns ``(params of the first seed, report)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != h.num_nodes:
        raise ShapeMismatch(f"{x.shape[0]} feature rows for {h.num_nodes} nodes")
    start = time.perf_counter()
    if jobs > 1 and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            runs = list(pool.map(lambda s: run_seed(h, x, labels, cfg, s, masks), cfg.seeds))
    else:
        runs = [run_seed(h, x, labels, cfg, s, masks) for s in cfg.seeds]
    name = PRIMARY_METRIC[cfg.task]
    report = MetricsReport(cfg.task.value, name, list(cfg.seeds), [r.metrics[name] for r in runs],
                           time.perf_counter() - start, [r.loss_curve for r in runs],
                           [r.val_curve for r in runs], runs=runs)
    return runs[0].params, report


def train_inductive(h: Hypergraph, x, labels, cfg: TrainConfig, split: InductiveSplit | None = None,
                    seed: int | None = None) -> dict:
    """Train on the seen sub-hypergraph, then score seen (validation) and unseen (test) nodes."""
    seed = cfg.seeds[0] if seed is None else seed
    split = inductive_split(h, labels, seed, task=cfg.task) if split is None else split
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    log = AccessLog(split.unseen)
    x_train = log.take_rows(x, split.seen)
    h_train = log.structure(split.h_train, split.seen)
    y_train = labels[split.seen]
    params, curve, _ = fit_params(h_train, x_train, y_train, split.train_masks["train"], cfg, seed)
    agg = cfg.aggregation()
    seen_metrics = evaluate(params, h_train, x_train, y_train, split.train_masks["val"], cfg.task, agg)
    unseen_scores = predict_unseen(None, split.h_full, x, params, agg, split.unseen)
    unseen_metrics = score_metrics(unseen_scores, labels[split.unseen], cfg.task)
    return {"seed": seed, "params": params, "split": split, "seen": seen_metrics,
            "unseen": unseen_metrics, "unseen_access_count": log.violations, "loss_curve": curve}


@dataclass
class ScalingReport:
    total_incidence: list
    seconds_per_epoch: list
    slope: float

    def to_dict(self) -> dict:
        return {"total_incidence": self.total_incidence, "seconds_per_epoch": self.seconds_per_epoch,
                "slope": self.slope}


def runtime_scaling_probe(sizes, cfg: TrainConfig | None = None, k: int = 3, dim: int = 16, classes: int = 4,
                          epochs: int = 5, seed: int = 0) -> ScalingReport:
    """Per-epoch training time on random ``k``-uniform hypergraphs with ``N = sum |e|`` in ``sizes``.

    Each size reports its fastest epoch after a warm-up epoch; the slope is
    the least-squares fit of log(time) against log(N).
    """
    from .datasets import random_uniform

    cfg = cfg or TrainConfig()
    sizes = sorted(int(s) for s in sizes)
    times = []
    for n_total in sizes:
        n_edges = max(1, n_total // k)
        ds = random_uniform(num_nodes=n_edges, num_edges=n_edges, k=k, dim=dim, num_classes=classes, seed=seed)
        agg = cfg.aggregation()
        params = init_params(dim, cfg.hidden_sizes, classes, seed, adaptive=cfg.adaptive, dropout=cfg.dropout)
        opt = T.Adam(params.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
        X = T.Tensor(ds.features)
        train_idx = np.arange(ds.hypergraph.num_nodes)
        per_epoch = []
        for epoch in range(epochs + 1):
            t0 = time.perf_counter()
            with T.Tape() as tape:
                scores = forward(ds.hypergraph, X, params, agg, ForwardMode(True, epoch))
                value = loss(T.gather_rows(scores, train_idx), ds.labels, Task.MULTICLASS)
            tape.backward(value, opt.params.values())
            opt.step()
            if epoch:  # first epoch warms caches (incidence arrays)
                per_epoch.append(time.perf_counter() - t0)
        times.append(float(np.min(per_epoch)))  # least-disturbed epoch
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    return ScalingReport(sizes, times, slope)
