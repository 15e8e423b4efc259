"""Two-level generalized-mean message passing on hypergraphs."""

from .aggregate import AggregationConfig, ImportanceNet, Normalization
from .datasets import Dataset, load_dataset, save_dataset
from .hypergraph import Hypergraph, PermutationMap, SplitPlan, build_hypergraph, fano_plane
from .model import ForwardMode, ModelParams, forward, init_params, predict_unseen
from .train import TrainConfig, train_model
from .estimator import HypergraphAggregator, HypergraphLevelClassifier, HyperMSGClassifier

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "ImportanceNet",
    "Normalization",
    "Dataset",
    "load_dataset",
    "save_dataset",
    "Hypergraph",
    "PermutationMap",
    "SplitPlan",
    "build_hypergraph",
    "fano_plane",
    "ForwardMode",
    "ModelParams",
    "forward",
    "init_params",
    "predict_unseen",
    "TrainConfig",
    "train_model",
    "HyperMSGClassifier",
    "HypergraphAggregator",
    "HypergraphLevelClassifier",
]
