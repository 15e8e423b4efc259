"""Command line: ``hypermsg {train,eval,stats,expand,verify,synth}``.

Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
Reports go to stdout as JSON; ``--out`` additionally writes files.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import atomic_write, dumps_dataset, fano_dataset, load_dataset, planted_two_block, random_uniform
from .errors import HyperMSGError
from .hypergraph import clique_expansion, connectedness_stats, induced_subhypergraph
from .model import predict_unseen
from .train import MetricsReport, Task, TrainConfig, evaluate, score_metrics, train_inductive, train_model
from .validation import check_dim

logger = logging.getLogger("hypermsg")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    """Bad flags or inputs; exits with code 2."""


# -- helpers ---------------------------------------------------------------------------


def parse_seeds(text) -> list:
    """``"3"``, ``"0..4"`` (inclusive) or ``"0,2,5"``."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise UsageError(f"empty seed range {text!r}")
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse seeds {text!r}") from exc


def parse_alpha(text):
    if text is None or str(text).lower() in ("full", "none"):
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise UsageError(f"--alpha takes a positive integer or 'full', not {text!r}") from exc


def _clean(obj):
    # strict JSON: NaN and inf become null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True) + "\n"


def _load(path):
    if not Path(path).is_file():
        raise UsageError(f"dataset not found: {path}")
    try:
        return load_dataset(path)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _emit(text: str, out: str | None, name: str | None = None, echo: bool = True):
    if echo or out is None:
        sys.stdout.write(text)
    if out is not None:
        path = Path(out) / name if name else Path(out)
        atomic_write(path, text)


# -- configuration ---------------------------------------------------------------------

_TRAIN_KEYS = ("epochs", "lr", "weight_decay", "dropout", "hidden_sizes", "p", "alpha", "adaptive",
               "normalization", "geometric", "seeds", "train_ratio", "val_ratio", "task", "nonlinearity")


def resolve_train_config(args) -> TrainConfig:
    """Config file values, overridden by any flag given on the command line."""
    base = {}
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
        unknown = set(base) - set(_TRAIN_KEYS) - {"data", "out", "inductive", "jobs", "layers", "hidden"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = {k: base[k] for k in _TRAIN_KEYS if k in base}
    for key in ("epochs", "lr", "weight_decay", "dropout", "p", "normalization", "geometric", "train_ratio",
                "val_ratio", "task", "adaptive"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    if args.alpha is not None:
        merged["alpha"] = parse_alpha(args.alpha)
    elif "alpha" in merged:
        merged["alpha"] = parse_alpha(merged["alpha"])
    if args.seeds is not None:
        merged["seeds"] = parse_seeds(args.seeds)
    elif "seeds" in merged:
        merged["seeds"] = parse_seeds(merged["seeds"])
    layers = args.layers if args.layers is not None else base.get("layers")
    hidden = args.hidden if args.hidden is not None else base.get("hidden")
    if layers is not None or hidden is not None:
        layers = 2 if layers is None else int(layers)
        if layers < 1:
            raise UsageError("--layers must be at least 1")
        width = 16 if hidden is None else int(hidden)
        merged["hidden_sizes"] = [width] * (layers - 1)
    if not merged.get("geometric") and float(merged.get("p", 1.0)) == 0.0:
        raise UsageError("p must be nonzero; use --geometric")
    try:
        return TrainConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands -----------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = resolve_train_config(args)
    ds = _load(args.data)
    if ds.labels is None:
        raise UsageError("dataset has no labels")
    x = ds.features_or_identity()
    masks = None
    if cfg.train_ratio is None and not args.inductive:
        if "train" not in ds.masks or "test" not in ds.masks:
            raise UsageError("dataset has no train/test masks; pass --train-ratio")
        masks = ds.masks
    # nothing is written until every seed has finished
    if args.inductive:
        report, checkpoints = _train_inductive(ds, x, cfg)
    else:
        _, report = train_model(ds.hypergraph, x, ds.labels, cfg, masks=masks, jobs=args.jobs)
        checkpoints = [(run.seed, run.params, {"masks": {k: v.tolist() for k, v in run.masks.items()}})
                       for run in report.runs]
        report.extra["test_metrics"] = [run.metrics for run in report.runs]
    if args.out:
        out = Path(args.out)
        resolved = {**cfg.to_dict(), "data": str(args.data), "out": args.out, "inductive": bool(args.inductive),
                    "jobs": args.jobs}
        atomic_write(out / "config.json", dumps(resolved))
        for seed, params, meta in checkpoints:
            save_checkpoint(out / f"checkpoint_seed{seed}.json", params, cfg.aggregation(), seed=seed,
                            task=cfg.task.value, **meta)
    _emit(dumps(report.to_dict()), args.out, "metrics.json")
    return EXIT_OK


def _train_inductive(ds, x, cfg: TrainConfig):
    start = time.perf_counter()
    results, checkpoints = [], []
    for seed in cfg.seeds:
        res = train_inductive(ds.hypergraph, x, ds.labels, cfg, seed=seed)
        results.append(res)
        sp = res["split"]
        checkpoints.append((seed, res["params"], {"masks": {k: v.tolist() for k, v in sp.masks.items()},
                                                  "inductive": {"seen": sp.seen.tolist()}}))
    name = "accuracy" if cfg.task is Task.MULTICLASS else "auc_roc"
    report = MetricsReport(cfg.task.value, name, list(cfg.seeds), [r["unseen"][name] for r in results],
                           time.perf_counter() - start, [r["loss_curve"] for r in results])
    seen = [r["seen"][name] for r in results]
    report.extra.update({"protocol": "inductive", "unseen_values": report.values, "seen_values": seen,
                         "seen_mean": float(np.mean(seen)), "seen_std": float(np.std(seen)),
                         "unseen_access_count": int(sum(r["unseen_access_count"] for r in results))})
    return report, checkpoints


def _load_masks(path) -> dict:
    if not Path(path).is_file():
        raise UsageError(f"masks file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    obj = obj.get("masks", obj)
    return {k: np.asarray(v, dtype=np.int64) for k, v in obj.items()}


def cmd_eval(args) -> int:
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    params, agg, meta = load_checkpoint(args.checkpoint)
    ds = _load(args.data)
    if ds.labels is None:
        raise UsageError("dataset has no labels")
    x = ds.features_or_identity()
    check_dim(params.in_dim, x.shape[1])
    task = Task(meta.get("task", "multiclass"))
    if args.masks:
        masks = _load_masks(args.masks)
    elif meta.get("masks"):
        masks = {k: np.asarray(v, dtype=np.int64) for k, v in meta["masks"].items()}
    else:
        masks = ds.masks
    if "test" not in masks:
        raise UsageError("no test mask in --masks, checkpoint or dataset")

    if args.unseen:
        if args.train_data:
            h_train = _load(args.train_data).hypergraph
            seen = np.setdiff1d(np.arange(ds.hypergraph.num_nodes), masks["test"])
        else:
            seen = np.asarray(meta.get("inductive", {}).get("seen", []), dtype=np.int64)
            if seen.size == 0:
                seen = np.setdiff1d(np.arange(ds.hypergraph.num_nodes), masks["test"])
            h_train = induced_subhypergraph(ds.hypergraph, seen)
        local = np.full(ds.hypergraph.num_nodes, -1, dtype=np.int64)
        local[seen] = np.arange(len(seen))
        val = masks.get("val", np.zeros(0, dtype=np.int64))
        seen_metrics = evaluate(params, h_train, x[seen], ds.labels[seen], local[val], task, agg)
        unseen_scores = predict_unseen(None, ds.hypergraph, x, params, agg, masks["test"])
        unseen_metrics = score_metrics(unseen_scores, ds.labels[masks["test"]], task)
        result = {"seen": seen_metrics, "unseen": unseen_metrics, "checkpoint": str(args.checkpoint)}
    else:
        result = {"test": evaluate(params, ds.hypergraph, x, ds.labels, masks["test"], task, agg),
                  "checkpoint": str(args.checkpoint)}
    _emit(dumps(result), args.out)
    return EXIT_OK


def cmd_stats(args) -> int:
    ds = _load(args.data)
    rep = connectedness_stats(ds.hypergraph, bins=args.bins).to_dict()
    rep.update({"num_nodes": ds.hypergraph.num_nodes, "num_edges": ds.hypergraph.num_edges,
                "total_incidence": ds.hypergraph.total_incidence})
    _emit(dumps(rep), args.out)
    return EXIT_OK


def cmd_expand(args) -> int:
    ds = _load(args.data)
    text = "".join(f"{u} {v}\n" for u, v in sorted(clique_expansion(ds.hypergraph)))
    _emit(text, args.out, echo=False)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import verify
    from .datasets import random_uniform as _ru
    from .model import init_params

    reports = []
    wanted = args.oracle
    if wanted in ("all", None):
        reports = verify.run_all(args.seed)
    elif wanted == "equivariance":
        ds = _ru(num_nodes=30, num_edges=12, k=4, dim=5, num_classes=3, seed=args.seed)
        from .aggregate import AggregationConfig

        cfg = AggregationConfig(p=args.p, adaptive=bool(args.adaptive))
        params = init_params(5, (8,), 3, args.seed, adaptive=bool(args.adaptive))
        reports = [verify.check_equivariance(ds.hypergraph, ds.features, params, cfg, args.trials, args.seed)]
    elif wanted == "split":
        reports = [verify.check_split_invariance(p=args.p, trials=args.trials, seed=args.seed)]
    elif wanted == "fano":
        reports = [verify.check_fano_degeneracy()]
    elif wanted == "sampler":
        C = [float(c) for c in args.weights.split(",")]
        reports = [verify.check_sampler(C, alpha=args.alpha, draws=args.draws, seed=args.seed)]
    elif wanted == "graph":
        rng = np.random.default_rng(args.seed)
        g = verify.random_graph(20, 35, rng)
        reports = [verify.check_graph_reduction(g, rng.normal(size=(20, 4)))]
    text = "".join(r.to_json() + "\n" for r in reports)
    _emit(text, args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_RUNTIME


def cmd_synth(args) -> int:
    if args.kind == "planted2":
        ds = planted_two_block(num_nodes=args.nodes or 200, edges_per_block=args.edges or 20, noise=args.noise,
                               dim=args.dim or 64, seed=args.seed)
    elif args.kind == "uniform":
        ds = random_uniform(num_nodes=args.nodes or 100, num_edges=args.edges or 50, k=args.k, dim=args.dim or 8,
                            num_classes=args.classes, seed=args.seed)
    elif args.kind in ("fano1", "fano2"):
        ds = fano_dataset(int(args.kind[-1]))
    else:  # argparse restricts choices
        raise UsageError(f"unknown kind {args.kind}")
    _emit(dumps_dataset(ds), args.out, echo=False)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def _add_train_flags(p):
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--p", type=float, help="power of the generalized mean (nonzero)")
    p.add_argument("--geometric", action="store_true", default=None, help="use the geometric mean (p -> 0)")
    p.add_argument("--alpha", help="neighbors sampled per hyperedge during training, or 'full'")
    p.add_argument("--layers", type=int, help="number of message-passing layers")
    p.add_argument("--hidden", type=int, help="hidden width")
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--adaptive", dest="adaptive", action="store_true", default=None)
    p.add_argument("--non-adaptive", dest="adaptive", action="store_false")
    p.add_argument("--normalization", choices=["intra", "global"])
    p.add_argument("--seed", "--seeds", dest="seeds", help="seed, list '0,1,2' or range '0..4'")
    p.add_argument("--train-ratio", dest="train_ratio", type=float,
                   help="fraction of labeled nodes to train on (default: masks from the file)")
    p.add_argument("--val-ratio", dest="val_ratio", type=float)
    p.add_argument("--task", choices=[t.value for t in Task if t is not Task.HYPERGRAPH])
    p.add_argument("--inductive", action="store_true", help="1:3:1 seen/unseen protocol")
    p.add_argument("--jobs", type=int, default=1, help="seeds trained concurrently")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypermsg", description="Hypergraph message passing toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and report test metrics")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="directory for config.json, metrics.json and checkpoints")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset (the full hypergraph for --unseen)")
    p.add_argument("--masks", help="JSON with train/val/test ids (default: checkpoint, then dataset)")
    p.add_argument("--unseen", action="store_true", help="report seen and unseen metrics separately")
    p.add_argument("--train-data", dest="train_data", help="training hypergraph for --unseen")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-node |N(v)|/|E(v)| distribution")
    p.add_argument("--data", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("expand", help="clique expansion as 'u v' lines")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("verify", help="run property oracles (JSON lines)")
    p.add_argument("oracle", nargs="?", default="all",
                   choices=["all", "equivariance", "split", "fano", "sampler", "graph"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--weights", default="9,1", help="sampler importance weights")
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="generate a dataset file")
    p.add_argument("--kind", required=True, choices=["planted2", "uniform", "fano1", "fano2"])
    p.add_argument("--nodes", type=int)
    p.add_argument("--edges", type=int, help="hyperedges (per block for planted2)")
    p.add_argument("--k", type=int, default=3, help="hyperedge size for uniform")
    p.add_argument("--dim", type=int)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, HyperMSGError) as exc:
        print(f"hypermsg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError, KeyError) as exc:
        # malformed inputs that slipped past the explicit checks
        print(f"hypermsg: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        logger.debug("runtime failure", exc_info=True)
        print(f"hypermsg: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
