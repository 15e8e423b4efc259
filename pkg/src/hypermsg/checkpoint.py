"""Parameter checkpoints: versioned JSON maps from name to shape and row-major float64 values."""

from __future__ import annotations

import json

import numpy as np

from .aggregate import AggregationConfig
from .datasets import atomic_write
from .errors import CheckpointFormatError
from .model import ModelParams, init_params

MAGIC = "HYPERMSG-CKPT-1"

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint", "dumps_state", "loads_state"]


def dumps_state(state: dict, meta: dict | None = None) -> str:
    tensors = {name: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
               for name, arr in state.items()}
    return json.dumps({"magic": MAGIC, "meta": meta or {}, "tensors": tensors}) + "\n"


def loads_state(text: str) -> tuple[dict, dict]:
    obj = json.loads(text)
    if not isinstance(obj, dict) or obj.get("magic") != MAGIC:
        raise CheckpointFormatError(f"not a {MAGIC} checkpoint")
    state = {}
    for name, t in obj["tensors"].items():
        arr = np.asarray(t["data"], dtype=np.float64)
        if arr.size != int(np.prod(t["shape"])):
            raise CheckpointFormatError(f"{name}: {arr.size} values for shape {t['shape']}")
        state[name] = arr.reshape(t["shape"])
    return state, obj.get("meta", {})


def save_checkpoint(path, params: ModelParams, cfg: AggregationConfig, **meta):
    """Write parameters plus the hyperparameters needed to rebuild the model."""
    info = {
        "layer_sizes": [params.in_dim] + [w.shape[1] for w in params.layer_weights],
        "aggregation": cfg.to_dict(),
        "dropout": params.dropout_rate,
        "nonlinearity": params.nonlinearity,
        "importance_hidden": list(params.importance.hidden) if params.importance else None,
        **meta,
    }
    atomic_write(path, dumps_state(params.state_dict(), info))


def load_checkpoint(path) -> tuple[ModelParams, AggregationConfig, dict]:
    with open(path, encoding="utf-8") as fh:
        state, meta = loads_state(fh.read())
    try:
        sizes = meta["layer_sizes"]
        agg = AggregationConfig(**meta["aggregation"])
    except (KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"checkpoint metadata incomplete: {exc}") from exc
    params = init_params(sizes[0], sizes[1:-1], sizes[-1], adaptive=agg.adaptive,
                         dropout=meta.get("dropout", 0.5), nonlinearity=meta.get("nonlinearity", "relu"),
                         importance_hidden=meta.get("importance_hidden") or (8, 8))
    params.load_state_dict(state)
    return params, agg, meta
