"""Contrastive pre-training and checkpointing.

The objective treats each instance's fused pre-encoding vector as the
positive for its own encoded output; the encoded outputs for the other
classes of the same instance are the negatives. As printed in its source,
the per-term denominator sums over the negatives only, so the loss can be
negative; `include_positive=True` switches to the conventional form with
the positive inside the denominator. The verbatim form is the default and
the tested contract.

Training is deterministic per seed: shuffling, dropout draws, and gradient
reduction all follow fixed streams/orders, so reruns (at any worker count)
are bit-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .encoder import (EncoderParams, Hyper, SuperNodeBundle, encode,
                      encode_grad, init_encoder_params, params_from_list,
                      params_to_list)
from .errors import (ContractViolation, DataValidationError, FileFormatError,
                     NumericalError, ParameterError)
from .graph_store import TASKS, ClassCatalog, GraphCollection
from .numerics import adam_init, adam_step, cosine_sim
from .subgraph import AnchorTask, graph_anchor, node_anchor

__all__ = [
    "TrainConfig",
    "Checkpoint",
    "CHECKPOINT_VERSION",
    "pretrain_loss",
    "pretrain_loss_grad",
    "build_anchors",
    "run_pretraining",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1

_PARAM_FIELDS = ("self_proj", "neighbor_proj", "out_proj", "score_vec")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings. epochs=0 is allowed and means "initialize
    only"; the checkpoint then carries the seeded initial parameters."""

    hyper: Hyper
    lr: float = 0.01
    weight_decay: float = 5e-5
    dropout: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ParameterError(
                f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError(
                f"dropout must lie in [0, 1), got {self.dropout}")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(
                f"batch_size must be >= 1, got {self.batch_size}")
        if self.seed < 0:
            raise ParameterError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class Checkpoint:
    params: EncoderParams
    hyper: Hyper
    train_config: TrainConfig
    final_loss: float
    format_version: int = CHECKPOINT_VERSION

    def __post_init__(self):
        if self.hyper != self.train_config.hyper:
            raise ContractViolation(
                "checkpoint hyper disagrees with its train_config")


def _check_bundles(bundles: list[SuperNodeBundle]) -> int:
    if not bundles:
        raise ContractViolation("loss needs at least one instance")
    n_classes = bundles[0].num_classes
    if n_classes < 2:
        raise ContractViolation(
            "loss needs at least 2 classes: a single class has no negatives")
    for b in bundles:
        if b.num_classes != n_classes:
            raise ContractViolation(
                f"bundles disagree on class count: {n_classes} vs "
                f"{b.num_classes}")
    return n_classes


def _instance_terms(bundle: SuperNodeBundle, tau: float,
                    include_positive: bool):
    """Loss contribution of one instance plus d(loss)/d(similarity).

    Returns (loss_i, dpos, dneg): dpos[j] multiplies the positive cosine
    of class j, dneg[j, q] the cosine between encoded outputs j and q.
    The log-sum-exp is max-shifted, so any finite tau is safe.
    """
    post, pre = bundle.post, bundle.pre
    n_classes = bundle.num_classes
    s_pos = np.array([cosine_sim(post[j], pre[j]) for j in range(n_classes)])
    s_neg = np.zeros((n_classes, n_classes))
    for j in range(n_classes):
        for q in range(j + 1, n_classes):
            s_neg[j, q] = s_neg[q, j] = cosine_sim(post[j], post[q])

    loss = 0.0
    dpos = np.zeros(n_classes)
    dneg = np.zeros((n_classes, n_classes))
    others = np.arange(n_classes)
    for j in range(n_classes):
        idx = others[others != j]
        scaled = s_neg[j, idx] / tau
        if include_positive:
            scaled = np.append(scaled, s_pos[j] / tau)
        top = scaled.max()
        weights = np.exp(scaled - top)
        total = weights.sum()
        lse = top + np.log(total)
        weights /= total
        loss -= s_pos[j] / tau - lse
        if include_positive:
            dpos[j] = -(1.0 - weights[-1]) / (n_classes * tau)
            dneg[j, idx] = weights[:-1] / (n_classes * tau)
        else:
            dpos[j] = -1.0 / (n_classes * tau)
            dneg[j, idx] = weights / (n_classes * tau)
    return loss / n_classes, dpos, dneg


def pretrain_loss(bundles: list[SuperNodeBundle], tau: float,
                  include_positive: bool = False) -> float:
    """Average contrastive loss over instances (verbatim form by default)."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    _check_bundles(bundles)
    total = 0.0
    for b in bundles:
        loss_i, _, _ = _instance_terms(b, tau, include_positive)
        total += loss_i
    return total / len(bundles)


def _cosine_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d cos(a, b) / d a; zero where either norm vanishes (cos is pinned
    to 0 there, the unique constant extension)."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return np.zeros_like(a)
    c = (a @ b) / (na * nb)
    return b / (na * nb) - c * a / (na * na)


def _instance_cotangent(bundle: SuperNodeBundle, tau: float,
                        include_positive: bool):
    """(loss_i, upstream) where upstream[j] = d loss_i / d post[j]."""
    loss_i, dpos, dneg = _instance_terms(bundle, tau, include_positive)
    post, pre = bundle.post, bundle.pre
    n_classes = bundle.num_classes
    upstream = np.zeros_like(post)
    for j in range(n_classes):
        upstream[j] += dpos[j] * _cosine_grad(post[j], pre[j])
        for q in range(n_classes):
            if q == j or dneg[j, q] == 0.0:
                continue
            upstream[j] += dneg[j, q] * _cosine_grad(post[j], post[q])
            upstream[q] += dneg[j, q] * _cosine_grad(post[q], post[j])
    return loss_i, upstream


def _instance_grad(anchor: AnchorTask, catalog: ClassCatalog,
                   params: EncoderParams, hyper: Hyper,
                   include_positive: bool):
    bundle = encode(anchor, catalog, params, hyper)
    loss_i, upstream = _instance_cotangent(bundle, hyper.tau,
                                           include_positive)
    return loss_i, params_to_list(
        encode_grad(anchor, catalog, params, hyper, upstream))


def pretrain_loss_grad(anchors: list[AnchorTask], catalog: ClassCatalog,
                       params: EncoderParams, hyper: Hyper,
                       include_positive: bool = False,
                       workers: int = 1):
    """Loss and its exact gradient on every encoder tensor.

    Per-instance contributions are independent, so they may be computed on
    `workers` threads; the reduction always runs in list order, making the
    result identical at any worker count.
    """
    if not anchors:
        raise ContractViolation("gradient needs at least one instance")
    if catalog.num_classes < 2:
        raise ContractViolation(
            "loss needs at least 2 classes: a single class has no negatives")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda a: _instance_grad(a, catalog, params, hyper,
                                         include_positive), anchors))
    else:
        parts = [_instance_grad(a, catalog, params, hyper, include_positive)
                 for a in anchors]
    scale = 1.0 / len(anchors)
    total = 0.0
    grads = [np.zeros_like(t) for t in params_to_list(params)]
    for loss_i, glist in parts:  # fixed order: ascending instance position
        total += loss_i
        for acc, g in zip(grads, glist):
            acc += g
    return total * scale, params_from_list([g * scale for g in grads])


def build_anchors(collection: GraphCollection, catalog: ClassCatalog,
                  ids, task: str, hops: int) -> list[AnchorTask]:
    """One anchor per instance id: whole graphs for the graph task,
    k-hop node views otherwise (which require a single-graph dataset)."""
    if task == "graph":
        return [graph_anchor(collection.graphs[i], catalog, i) for i in ids]
    if len(collection.graphs) != 1:
        raise DataValidationError(
            f"{task} task expects exactly one graph, got "
            f"{len(collection.graphs)}")
    g = collection.graphs[0]
    return [node_anchor(g, catalog, v, hops) for v in ids]


def _apply_dropout(anchor: AnchorTask, rng: np.random.Generator,
                   rate: float) -> AnchorTask:
    if anchor.neighbor_reprs.size == 0:
        return anchor
    keep = rng.random(anchor.neighbor_reprs.shape) >= rate
    # Inverted scaling keeps the neighbor sum unbiased in expectation.
    dropped = anchor.neighbor_reprs * keep / (1.0 - rate)
    return AnchorTask(anchor.instance_id, anchor.anchor_repr,
                      anchor.neighborhood, dropped)


def run_pretraining(collection: GraphCollection, catalog: ClassCatalog,
                    split, task: str, config: TrainConfig,
                    workers: int = 1, on_epoch=None,
                    include_positive: bool = False) -> Checkpoint:
    """Minibatch training over the train split; returns the frozen model.

    Shuffling and dropout use dedicated streams derived from config.seed,
    so two runs with the same config are bit-identical. on_epoch, when
    given, receives (epoch, mean batch loss) once per epoch. final_loss is
    the full-split loss of the finished parameters with dropout off.
    """
    if task not in TASKS:
        raise ParameterError(f"unknown task {task!r}, expected one of {TASKS}")
    if catalog.num_classes < 2:
        raise ContractViolation(
            "pre-training needs at least 2 classes for the loss negatives")
    anchors = build_anchors(collection, catalog, split.train, task,
                             config.hyper.hops)
    if not anchors:
        raise ContractViolation("training split is empty")

    params = init_encoder_params(catalog.dim, config.seed)
    plist = params_to_list(params)
    state = adam_init(plist, config.lr)
    shuffle_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, 1])))
    drop_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, 2])))

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(anchors))
        batch_losses = []
        for b_start in range(0, len(order), config.batch_size):
            b_index = b_start // config.batch_size
            batch = [anchors[i] for i in order[b_start:b_start +
                                               config.batch_size]]
            if config.dropout > 0.0:
                # masks drawn serially here, so worker count cannot
                # perturb the stream
                batch = [_apply_dropout(a, drop_rng, config.dropout)
                         for a in batch]
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    loss, grads = pretrain_loss_grad(
                        batch, catalog, params_from_list(plist), config.hyper,
                        include_positive, workers)
            except ContractViolation as exc:
                # inputs were validated up front, so a violation here means
                # the forward pass overflowed
                raise NumericalError(
                    f"non-finite values at epoch {epoch} batch {b_index}: "
                    f"{exc}") from exc
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} batch {b_index}")
            plist, state = adam_step(plist, params_to_list(grads), state)
            if config.weight_decay > 0.0:
                decay = config.lr * config.weight_decay
                plist = [p - decay * old
                         for p, old in zip(plist, params_to_list(params))]
            if any(not np.all(np.isfinite(p)) for p in plist):
                raise NumericalError(
                    f"parameters became non-finite at epoch {epoch} "
                    f"batch {b_index}")
            params = params_from_list(plist)
            batch_losses.append(loss)
        if on_epoch is not None:
            on_epoch(epoch, float(np.mean(batch_losses)))

    try:
        with np.errstate(over="ignore", invalid="ignore"):
            bundles = [encode(a, catalog, params, config.hyper)
                       for a in anchors]
            final_loss = pretrain_loss(bundles, config.hyper.tau,
                                       include_positive)
    except ContractViolation as exc:
        raise NumericalError(
            f"non-finite values while evaluating the final loss: "
            f"{exc}") from exc
    if not np.isfinite(final_loss):
        raise NumericalError("final loss is non-finite")
    return Checkpoint(params=params, hyper=config.hyper, train_config=config,
                      final_loss=final_loss)


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    """JSON with flattened row-major tensors; floats keep full precision
    through Python's shortest round-trip repr."""
    cfg = checkpoint.train_config
    doc = {
        "format_version": checkpoint.format_version,
        "dim": checkpoint.params.dim,
        "hyper": {
            "alpha": checkpoint.hyper.alpha,
            "beta": checkpoint.hyper.beta,
            "tau": checkpoint.hyper.tau,
            "threshold": checkpoint.hyper.threshold,
            "hops": checkpoint.hyper.hops,
        },
        "train_config": {
            "lr": cfg.lr,
            "weight_decay": cfg.weight_decay,
            "dropout": cfg.dropout,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
        },
        "params": {name: getattr(checkpoint.params, name).ravel().tolist()
                   for name in _PARAM_FIELDS},
        "final_loss": checkpoint.final_loss,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"checkpoint is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise FileFormatError("checkpoint must be a JSON object")
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise FileFormatError(
            f"unsupported checkpoint format_version {version!r}, "
            f"expected {CHECKPOINT_VERSION}")
    for key in ("dim", "hyper", "train_config", "params", "final_loss"):
        if key not in doc:
            raise FileFormatError(f"checkpoint is missing {key!r}")
    dim = int(doc["dim"])
    raw = doc["params"]
    tensors = {}
    for name in _PARAM_FIELDS:
        if name not in raw:
            raise FileFormatError(f"checkpoint is missing tensor {name!r}")
        flat = np.asarray(raw[name], dtype=np.float64)
        want = 2 * dim if name == "score_vec" else dim * dim
        if flat.size != want:
            raise FileFormatError(
                f"tensor {name!r} has {flat.size} entries, expected {want}")
        tensors[name] = flat if name == "score_vec" \
            else flat.reshape(dim, dim)
    try:
        hyper = Hyper(**doc["hyper"])
        config = TrainConfig(hyper=hyper, **doc["train_config"])
        params = EncoderParams(**tensors)
    except (TypeError, ParameterError, ContractViolation) as exc:
        raise FileFormatError(f"checkpoint fields invalid: {exc}")
    return Checkpoint(params=params, hyper=hyper, train_config=config,
                      final_loss=float(doc["final_loss"]))
