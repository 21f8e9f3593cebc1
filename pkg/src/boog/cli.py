"""Command-line pipeline: dataset synthesis, pre-training, evaluation,
grid search, scaling benchmark, and representation export.

Machine-readable output is a single JSON document on stdout; progress
lines go to stderr. Exit codes: 0 success, 1 validation or parameter
failure, 2 I/O failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .downstream import (evaluate, extract_representations,
                         link_eval_features, link_training_set,
                         mlp_probabilities, predict_mlp, sample_few_shot,
                         sample_link_pairs, train_mlp)
from .encoder import Hyper, encode, init_encoder_params
from .errors import (DataValidationError, NumericalError, ParameterError,
                     ShapeError)
from .graph_store import generate_synthetic, load_dataset, save_dataset, \
    save_embeddings
from .inference import link_scores, zero_shot_classify
from .pretrain import (TrainConfig, build_anchors, load_checkpoint,
                       pretrain_loss, run_pretraining, save_checkpoint)

__all__ = ["RunConfig", "main"]

_REQUIRED = object()
_SEED = object()  # placeholder resolved from BOOG_SEED, then 0


def _to_int(key, s):
    try:
        return int(s)
    except (TypeError, ValueError):
        raise ParameterError(f"--{key} expects an integer, got {s!r}")


def _to_float(key, s):
    try:
        v = float(s)
    except (TypeError, ValueError):
        raise ParameterError(f"--{key} expects a number, got {s!r}")
    if not np.isfinite(v):
        raise ParameterError(f"--{key} must be finite, got {s!r}")
    return v


def _to_str(key, s):
    return s


def _to_int_list(key, s):
    return tuple(_to_int(key, part) for part in str(s).split(","))


def _to_float_list(key, s):
    return tuple(_to_float(key, part) for part in str(s).split(","))


# key -> (converter, default) per command; _REQUIRED must be supplied by
# flag or config file, _SEED falls back to the BOOG_SEED env var then 0.
_PARAMS = {
    "synth": {
        "profile": (_to_str, "citation"),
        "n": (_to_int, 100),
        "classes": (_to_int, 3),
        "dim": (_to_int, 16),
        "seed": (_to_int, _SEED),
        "noise": (_to_float, 0.05),
        "avg-degree": (_to_int, 8),
        "out": (_to_str, _REQUIRED),
        "catalog-from": (_to_str, None),
    },
    "pretrain": {
        "dataset": (_to_str, _REQUIRED),
        "out": (_to_str, _REQUIRED),
        "trace": (_to_str, None),
        "lr": (_to_float, 0.01),
        "weight-decay": (_to_float, 5e-5),
        "dropout": (_to_float, 0.0),
        "epochs": (_to_int, 50),
        "batch-size": (_to_int, 32),
        "seed": (_to_int, _SEED),
        "alpha": (_to_float, 0.5),
        "beta": (_to_float, 0.5),
        "tau": (_to_float, 1.0),
        "threshold": (_to_float, 0.5),
        "hops": (_to_int, 1),
        "workers": (_to_int, 1),
    },
    "eval": {
        "dataset": (_to_str, _REQUIRED),
        "checkpoint": (_to_str, _REQUIRED),
        "regime": (_to_str, _REQUIRED),
        "shots": (_to_int, 5),
        "ways": (_to_int, None),
        "seed": (_to_int, _SEED),
        "steps": (_to_int, 200),
        "lr": (_to_float, 0.01),
        "hidden": (_to_str, None),
        "results": (_to_str, None),
        "workers": (_to_int, 1),
    },
    "grid": {
        "dataset": (_to_str, _REQUIRED),
        "epochs": (_to_int, 20),
        "batch-size": (_to_int, 32),
        "seed": (_to_int, _SEED),
        "hops": (_to_int, 1),
        "workers": (_to_int, 1),
        "lr": (_to_float_list, (0.01,)),
        "weight-decay": (_to_float_list, (5e-5,)),
        "dropout": (_to_float_list, (0.0,)),
        "alpha": (_to_float_list, (0.5,)),
        "beta": (_to_float_list, (0.5,)),
        "tau": (_to_float_list, (1.0,)),
        "threshold": (_to_float_list, (0.5,)),
    },
    "bench": {
        "sizes": (_to_int_list, (500, 1000, 2000)),
        "repetitions": (_to_int, 5),
        "seed": (_to_int, _SEED),
        "dim": (_to_int, 16),
        "avg-degree": (_to_int, 8),
        "hops": (_to_int, 1),
        "alpha": (_to_float, 0.5),
        "beta": (_to_float, 0.5),
        "tau": (_to_float, 1.0),
    },
    "export-repr": {
        "dataset": (_to_str, _REQUIRED),
        "checkpoint": (_to_str, _REQUIRED),
        "out": (_to_str, _REQUIRED),
        "split": (_to_str, "all"),
    },
}

_REGIMES = ("zero-shot", "few-shot", "supervised", "link-zero",
            "link-supervised")


@dataclass(frozen=True)
class RunConfig:
    """One command plus its fully resolved, validated parameters."""

    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which this tool reserves
    # for I/O failures; route usage problems through the taxonomy instead
    def error(self, message):
        raise ParameterError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="boog", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for command, table in _PARAMS.items():
        p = sub.add_parser(command, add_help=True)
        p.add_argument("--config", default=None,
                       help="flat key=value file; flags override it")
        for key in table:
            p.add_argument(f"--{key}", dest=key.replace("-", "_"),
                           default=None)
    return parser


def _read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise ParameterError(
                f"{path}:{lineno}: expected key=value, got {raw!r}")
        values[key.strip().replace("_", "-")] = val.strip()
    return values


def _resolve(command: str, args: argparse.Namespace) -> RunConfig:
    table = _PARAMS[command]
    resolved = {key: default for key, (_, default) in table.items()}
    if args.config is not None:
        for key, raw in _read_config_file(args.config).items():
            if key not in table:
                raise ParameterError(
                    f"unknown config key {key!r} for {command}")
            resolved[key] = table[key][0](key, raw)
    for key, (convert, _) in table.items():
        flag_value = getattr(args, key.replace("-", "_"))
        if flag_value is not None:
            resolved[key] = convert(key, flag_value)
    for key, value in resolved.items():
        if value is _REQUIRED:
            raise ParameterError(f"missing required --{key}")
        if value is _SEED:
            env = os.environ.get("BOOG_SEED")
            resolved[key] = _to_int("seed", env) if env is not None else 0
    return RunConfig(command, resolved)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _instance_labels(collection, task):
    if task == "graph":
        labels = collection.graph_labels
    else:
        labels = collection.graphs[0].labels
    if labels is None or any(x is None for x in labels):
        raise DataValidationError("dataset has no usable instance labels")
    return np.asarray(labels, dtype=np.int64)


def _hyper_from(cfg: RunConfig) -> Hyper:
    return Hyper(alpha=cfg["alpha"], beta=cfg["beta"], tau=cfg["tau"],
                 threshold=cfg["threshold"], hops=cfg["hops"])


# ------------------------------------------------------------------ synth

def cmd_synth(cfg: RunConfig) -> dict:
    catalog = None
    if cfg["catalog-from"]:
        _, catalog, _, _ = load_dataset(cfg["catalog-from"])
    collection, catalog, split = generate_synthetic(
        cfg["profile"], cfg["n"], cfg["classes"], cfg["dim"], cfg["seed"],
        noise=cfg["noise"], avg_degree=cfg["avg-degree"], catalog=catalog)
    task = "node" if cfg["profile"] == "citation" else "graph"
    save_dataset(collection, catalog, split, task, cfg["out"])
    _log(f"wrote {cfg['out']}")
    return {"out": cfg["out"], "task": task, "n": cfg["n"],
            "classes": cfg["classes"], "dim": cfg["dim"],
            "graphs": len(collection.graphs), "seed": cfg["seed"]}


# --------------------------------------------------------------- pretrain

def cmd_pretrain(cfg: RunConfig) -> dict:
    collection, catalog, split, task = load_dataset(cfg["dataset"])
    config = TrainConfig(hyper=_hyper_from(cfg), lr=cfg["lr"],
                         weight_decay=cfg["weight-decay"],
                         dropout=cfg["dropout"], epochs=cfg["epochs"],
                         batch_size=cfg["batch-size"], seed=cfg["seed"])
    trace: list[dict] = []

    def on_epoch(epoch, loss):
        trace.append({"epoch": epoch, "loss": loss})
        _log(f"epoch {epoch}: loss {loss:.6f}")

    checkpoint = run_pretraining(collection, catalog, split, task, config,
                                 workers=cfg["workers"], on_epoch=on_epoch)
    save_checkpoint(checkpoint, cfg["out"])
    if cfg["trace"]:
        with open(cfg["trace"], "w", encoding="utf-8") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
    return {"out": cfg["out"], "task": task, "epochs": cfg["epochs"],
            "final_loss": checkpoint.final_loss,
            "first_epoch_loss": trace[0]["loss"] if trace else None,
            "last_epoch_loss": trace[-1]["loss"] if trace else None}


# ------------------------------------------------------------------- eval

def _hidden_dims(cfg: RunConfig):
    if cfg["hidden"] is None:
        return None
    if cfg["hidden"] == "none":
        return ()
    return tuple(_to_int_list("hidden", cfg["hidden"]))


def _node_task_eval(cfg, collection, catalog, split, task, checkpoint):
    labels = _instance_labels(collection, task)
    hops = checkpoint.hyper.hops
    regime = cfg["regime"]
    test_anchors = build_anchors(collection, catalog, split.test, task, hops)
    truth = labels[list(split.test)]

    if regime == "zero-shot":
        preds = zero_shot_classify(test_anchors, catalog, checkpoint)
        return evaluate(preds, truth, "accuracy"), len(split.test)

    if regime == "few-shot":
        ways = cfg["ways"] if cfg["ways"] is not None else catalog.num_classes
        task_spec = sample_few_shot(split, labels, ways, cfg["shots"],
                                    cfg["seed"])
        sup = build_anchors(collection, catalog, task_spec.support, task,
                            hops)
        qry = build_anchors(collection, catalog, task_spec.query, task, hops)
        feats = extract_representations(sup, catalog, checkpoint)
        mlp = train_mlp(feats, labels[list(task_spec.support)],
                        hidden_dims=_hidden_dims(cfg),
                        output_dim=catalog.num_classes, lr=cfg["lr"],
                        steps=cfg["steps"], seed=cfg["seed"])
        zq = extract_representations(qry, catalog, checkpoint)
        preds = predict_mlp(zq, mlp)
        acc = evaluate(preds, labels[list(task_spec.query)], "accuracy")
        return acc, len(task_spec.query)

    # supervised: full train split, validation split picks the parameters
    train_anchors = build_anchors(collection, catalog, split.train, task,
                                  hops)
    zt = extract_representations(train_anchors, catalog, checkpoint)
    val_feats = val_labels = None
    if split.val:
        val_anchors = build_anchors(collection, catalog, split.val, task,
                                    hops)
        val_feats = extract_representations(val_anchors, catalog, checkpoint)
        val_labels = labels[list(split.val)]
    mlp = train_mlp(zt, labels[list(split.train)], val_feats, val_labels,
                    hidden_dims=_hidden_dims(cfg),
                    output_dim=catalog.num_classes, lr=cfg["lr"],
                    steps=cfg["steps"], seed=cfg["seed"])
    zq = extract_representations(test_anchors, catalog, checkpoint)
    preds = predict_mlp(zq, mlp)
    return evaluate(preds, truth, "accuracy"), len(split.test)


def _link_eval(cfg, collection, catalog, split, checkpoint):
    if len(collection.graphs) != 1:
        raise DataValidationError("link evaluation expects a single graph")
    g = collection.graphs[0]
    regime = cfg["regime"]
    test_pairs, test_truth = sample_link_pairs(g, split.test, cfg["seed"])

    if regime == "link-zero":
        scores = link_scores(test_pairs, g, catalog, checkpoint)
        return evaluate(scores, test_truth, "roc_auc"), len(test_pairs)

    train_pairs, train_truth = sample_link_pairs(g, split.train, cfg["seed"])
    val_pairs = ()
    val_truth = None
    if split.val:
        try:
            val_pairs, val_truth = sample_link_pairs(g, split.val,
                                                     cfg["seed"])
        except DataValidationError:
            _log("validation split has no usable pairs; "
                 "keeping final-step parameters")
    needed = sorted({v for pair in train_pairs + list(val_pairs) + test_pairs
                     for v in pair})
    anchors = build_anchors(collection, catalog, needed, "link",
                            checkpoint.hyper.hops)
    z = extract_representations(anchors, catalog, checkpoint)
    reprs = {v: z[i] for i, v in enumerate(needed)}
    feats, labs = link_training_set(reprs, train_pairs, train_truth)
    val_feats = val_labs = None
    if val_pairs:
        val_feats, val_labs = link_training_set(reprs, val_pairs, val_truth)
    mlp = train_mlp(feats, labs, val_feats, val_labs,
                    hidden_dims=_hidden_dims(cfg),
                    output_dim=2, lr=cfg["lr"], steps=cfg["steps"],
                    seed=cfg["seed"])
    scores = mlp_probabilities(link_eval_features(reprs, test_pairs),
                               mlp)[:, 1]
    return evaluate(scores, test_truth, "roc_auc"), len(test_pairs)


def cmd_eval(cfg: RunConfig) -> dict:
    if cfg["regime"] not in _REGIMES:
        raise ParameterError(
            f"regime must be one of {_REGIMES}, got {cfg['regime']!r}")
    collection, catalog, split, task = load_dataset(cfg["dataset"])
    checkpoint = load_checkpoint(cfg["checkpoint"])
    if checkpoint.params.dim != catalog.dim:
        raise ShapeError("checkpoint dim does not match dataset dim",
                         checkpoint.params.dim, catalog.dim)

    if cfg["regime"].startswith("link"):
        value, n_test = _link_eval(cfg, collection, catalog, split,
                                   checkpoint)
        metric = "roc_auc"
    else:
        value, n_test = _node_task_eval(cfg, collection, catalog, split,
                                        task, checkpoint)
        metric = "accuracy"

    report = {"task": task, "regime": cfg["regime"], "metric": metric,
              "value": value, "seed": cfg["seed"], "n_test": n_test}
    if cfg["results"]:
        with open(cfg["results"], "a", encoding="utf-8") as fh:
            fh.write(json.dumps(report) + "\n")
    _log(f"{cfg['regime']}: {metric} {value:.4f} on {n_test} instances")
    return report


# ------------------------------------------------------------------- grid

_GRID_AXES = ("alpha", "beta", "dropout", "lr", "tau", "threshold",
              "weight-decay")


def cmd_grid(cfg: RunConfig) -> dict:
    collection, catalog, split, task = load_dataset(cfg["dataset"])
    labels = None if task == "link" else _instance_labels(collection, task)
    axes = {axis: tuple(sorted(set(cfg[axis]))) for axis in _GRID_AXES}
    rows = []
    best_row = None
    # lexicographic enumeration over sorted axis values; first strict
    # improvement wins, so ties resolve to the lowest config
    for combo in product(*(axes[a] for a in _GRID_AXES)):
        point = dict(zip(_GRID_AXES, combo))
        hyper = Hyper(alpha=point["alpha"], beta=point["beta"],
                      tau=point["tau"], threshold=point["threshold"],
                      hops=cfg["hops"])
        config = TrainConfig(hyper=hyper, lr=point["lr"],
                             weight_decay=point["weight-decay"],
                             dropout=point["dropout"], epochs=cfg["epochs"],
                             batch_size=cfg["batch-size"], seed=cfg["seed"])
        checkpoint = run_pretraining(collection, catalog, split, task,
                                     config, workers=cfg["workers"])
        if task == "link":
            pairs, truth = sample_link_pairs(collection.graphs[0], split.val,
                                             cfg["seed"])
            scores = link_scores(pairs, collection.graphs[0], catalog,
                                 checkpoint)
            value = evaluate(scores, truth, "roc_auc")
        else:
            anchors = build_anchors(collection, catalog, split.val, task,
                                    hyper.hops)
            preds = zero_shot_classify(anchors, catalog, checkpoint)
            value = evaluate(preds, labels[list(split.val)], "accuracy")
        row = dict(point)
        row["metric"] = value
        rows.append(row)
        _log(f"grid point {point} -> {value:.4f}")
        if best_row is None or value > best_row["metric"]:
            best_row = row
    best = {k: v for k, v in best_row.items() if k != "metric"}
    return {"best": best, "best_metric": best_row["metric"], "table": rows}


# ------------------------------------------------------------------ bench

def cmd_bench(cfg: RunConfig) -> dict:
    sizes = cfg["sizes"]
    if list(sizes) != sorted(sizes) or len(set(sizes)) != len(sizes):
        raise ParameterError(f"sizes must be strictly ascending, got {sizes}")
    if cfg["repetitions"] < 1:
        raise ParameterError("repetitions must be >= 1")
    hyper = Hyper(alpha=cfg["alpha"], beta=cfg["beta"], tau=cfg["tau"],
                  threshold=0.5, hops=cfg["hops"])
    rows = []
    prev = None
    for n in sizes:
        collection, catalog, _ = generate_synthetic(
            "citation", n, 3, cfg["dim"], cfg["seed"],
            avg_degree=cfg["avg-degree"])
        # anchor construction stays outside the timer: the measured cost
        # is encode + loss per instance
        anchors = build_anchors(collection, catalog, range(n), "node",
                                cfg["hops"])
        params = init_encoder_params(cfg["dim"], cfg["seed"])
        times = []
        for _ in range(cfg["repetitions"]):
            start = time.perf_counter()
            bundles = [encode(a, catalog, params, hyper) for a in anchors]
            pretrain_loss(bundles, hyper.tau)
            times.append(time.perf_counter() - start)
        med = statistics.median(times)
        row = {"n": n, "seconds": med, "seconds_per_instance": med / n,
               "ratio_vs_prev": (med / prev) if prev is not None else None}
        rows.append(row)
        _log(f"n={n}: {med:.4f}s ({med / n * 1e6:.1f}us per instance)")
        prev = med
    return {"sizes": list(sizes), "repetitions": cfg["repetitions"],
            "table": rows}


# ------------------------------------------------------------ export-repr

def cmd_export_repr(cfg: RunConfig) -> dict:
    collection, catalog, split, task = load_dataset(cfg["dataset"])
    checkpoint = load_checkpoint(cfg["checkpoint"])
    if checkpoint.params.dim != catalog.dim:
        raise ShapeError("checkpoint dim does not match dataset dim",
                         checkpoint.params.dim, catalog.dim)
    if cfg["split"] == "all":
        ids = sorted(split.train + split.val + split.test)
    elif cfg["split"] in ("train", "val", "test"):
        ids = list(getattr(split, cfg["split"]))
    else:
        raise ParameterError(
            f"split must be train, val, test, or all, got {cfg['split']!r}")
    anchors = build_anchors(collection, catalog, ids, task,
                            checkpoint.hyper.hops)
    z = extract_representations(anchors, catalog, checkpoint)
    save_embeddings(list(z), cfg["out"], dim=catalog.dim)
    _log(f"wrote {len(ids)} vectors to {cfg['out']}")
    return {"out": cfg["out"], "count": len(ids), "dim": catalog.dim,
            "split": cfg["split"]}


_DISPATCH = {
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "eval": cmd_eval,
    "grid": cmd_grid,
    "bench": cmd_bench,
    "export-repr": cmd_export_repr,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ParameterError("no command given; see --help")
        cfg = _resolve(args.command, args)
        payload = _DISPATCH[cfg.command](cfg)
        print(json.dumps(payload))
        return 0
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
