"""Frozen-backbone adaptation and evaluation.

Final representations come from the frozen encoder; everything trainable
here is a softmax cross-entropy MLP on top of them. Also provides the
pair-concatenation feature map for link tasks, seeded support-set sampling
for N-way K-shot runs, and the two evaluation metrics (exact-match
accuracy, rank-based tie-aware ROC-AUC).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ContractViolation, DataValidationError, ParameterError,
                     ShapeError, UndefinedMetricError)
from .graph_store import ClassCatalog, DatasetSplit, EmbeddedGraph
from .inference import match_instances
from .numerics import adam_init, adam_step, relu, softmax_rows
from .pretrain import Checkpoint
from .subgraph import AnchorTask

__all__ = [
    "MlpParams",
    "FewShotTask",
    "extract_representations",
    "mlp_logits",
    "mlp_probabilities",
    "mlp_loss_and_grads",
    "train_mlp",
    "predict_mlp",
    "link_features",
    "sample_link_pairs",
    "link_training_set",
    "link_eval_features",
    "sample_few_shot",
    "evaluate",
]


@dataclass(frozen=True)
class MlpParams:
    """Dense feed-forward stack: rectified hidden layers, linear output."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_dims: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeError("weight/bias count mismatch",
                             len(self.weights), len(self.biases))
        if len(self.weights) != len(self.hidden_dims) + 1:
            raise ShapeError("layer count disagrees with hidden_dims",
                             len(self.weights), len(self.hidden_dims) + 1)
        dims = (self.weights[0].shape[1], *self.hidden_dims, self.output_dim)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ShapeError(f"layer {i} weight shape", w.shape,
                                 (dims[i + 1], dims[i]))
            if b.shape != (dims[i + 1],):
                raise ShapeError(f"layer {i} bias shape", b.shape,
                                 (dims[i + 1],))
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ContractViolation(f"layer {i} has non-finite entries")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]


@dataclass(frozen=True)
class FewShotTask:
    """Support/query index sets for one N-way K-shot run."""

    n_way: int
    k_shot: int
    support: tuple[int, ...]
    query: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if len(self.support) != self.n_way * self.k_shot:
            raise ContractViolation(
                f"support must hold n_way*k_shot={self.n_way * self.k_shot} "
                f"ids, got {len(self.support)}")
        if set(self.support) & set(self.query):
            raise ContractViolation("support and query sets overlap")


def extract_representations(instances: list[AnchorTask],
                            catalog: ClassCatalog,
                            checkpoint: Checkpoint) -> np.ndarray:
    """Final representation per instance, parameters frozen throughout."""
    matches = match_instances(instances, catalog, checkpoint)
    return np.stack([m.final_repr for m in matches]) if matches \
        else np.zeros((0, catalog.dim))


def _unpack(flat_x, features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != flat_x:
        raise ShapeError("feature matrix has wrong width",
                         np.shape(features), (None, flat_x))
    return x


def mlp_logits(features, mlp: MlpParams) -> np.ndarray:
    x = _unpack(mlp.input_dim, features)
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        x = relu(x @ w.T + b)
    return x @ mlp.weights[-1].T + mlp.biases[-1]


def mlp_probabilities(features, mlp: MlpParams) -> np.ndarray:
    return softmax_rows(mlp_logits(features, mlp))


def predict_mlp(features, mlp: MlpParams) -> np.ndarray:
    """Argmax class per row; ties go to the lowest index."""
    return np.argmax(mlp_logits(features, mlp), axis=1).astype(np.int64)


def mlp_loss_and_grads(mlp: MlpParams, features, labels):
    """Mean cross-entropy and its exact gradient for every layer.

    Returns (loss, weight_grads, bias_grads) with grads shaped like the
    parameters.
    """
    x = _unpack(mlp.input_dim, features)
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ShapeError("labels misaligned with features", y.shape,
                         (x.shape[0],))
    if y.size == 0:
        raise ContractViolation("cross-entropy over an empty set")
    if y.min() < 0 or y.max() >= mlp.output_dim:
        raise DataValidationError(
            f"labels must lie in [0, {mlp.output_dim}), got "
            f"[{y.min()}, {y.max()}]")

    # forward, keeping pre-activations for the backward pass
    acts = [x]
    pre = []
    h = x
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        z = h @ w.T + b
        pre.append(z)
        h = relu(z)
        acts.append(h)
    logits = h @ mlp.weights[-1].T + mlp.biases[-1]
    probs = softmax_rows(logits)
    n = x.shape[0]
    picked = probs[np.arange(n), y]
    loss = float(-np.mean(np.log(picked)))

    d_logits = probs.copy()
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    w_grads = [None] * len(mlp.weights)
    b_grads = [None] * len(mlp.biases)
    dz = d_logits
    for i in range(len(mlp.weights) - 1, -1, -1):
        w_grads[i] = dz.T @ acts[i]
        b_grads[i] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ mlp.weights[i]) * (pre[i - 1] > 0)
    return loss, tuple(w_grads), tuple(b_grads)


def _init_mlp(input_dim, hidden_dims, output_dim, seed) -> MlpParams:
    rng = np.random.Generator(np.random.PCG64(seed))
    dims = (input_dim, *hidden_dims, output_dim)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=tuple(weights), biases=tuple(biases),
                     hidden_dims=tuple(hidden_dims), output_dim=output_dim)


def train_mlp(features, labels, val_features=None, val_labels=None, *,
              hidden_dims=None, output_dim=None, lr: float = 0.01,
              steps: int = 200, seed: int = 0) -> MlpParams:
    """Full-batch Adam on softmax cross-entropy.

    hidden_dims defaults to one rectified layer as wide as the input;
    () gives plain multinomial logistic regression. With a validation set
    the parameters with the lowest validation loss along the trajectory
    (initialization included) are returned, earliest step winning ties;
    without one, the final step's parameters.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractViolation("training set is empty")
    if steps < 0:
        raise ParameterError(f"steps must be >= 0, got {steps}")
    if output_dim is None:
        output_dim = int(y.max()) + 1
    if hidden_dims is None:
        hidden_dims = (x.shape[1],)
    mlp = _init_mlp(x.shape[1], tuple(hidden_dims), int(output_dim), seed)

    has_val = val_features is not None and val_labels is not None \
        and len(np.asarray(val_labels)) > 0

    def val_loss(m):
        loss, _, _ = mlp_loss_and_grads(m, val_features, val_labels)
        return loss

    flat = list(mlp.weights) + list(mlp.biases)
    state = adam_init(flat, lr)
    n_w = len(mlp.weights)
    best, best_loss = mlp, val_loss(mlp) if has_val else None
    for _ in range(steps):
        _, w_grads, b_grads = mlp_loss_and_grads(mlp, x, y)
        flat, state = adam_step(flat, list(w_grads) + list(b_grads), state)
        mlp = MlpParams(weights=tuple(flat[:n_w]), biases=tuple(flat[n_w:]),
                        hidden_dims=mlp.hidden_dims,
                        output_dim=mlp.output_dim)
        if has_val:
            loss = val_loss(mlp)
            if loss < best_loss:
                best, best_loss = mlp, loss
    return best if has_val else mlp


def link_features(z_u: np.ndarray, z_v: np.ndarray) -> np.ndarray:
    """Ordered pair feature: plain concatenation, deliberately asymmetric."""
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    if z_u.shape != z_v.shape or z_u.ndim != 1:
        raise ShapeError("endpoint representation mismatch",
                         z_u.shape, z_v.shape)
    return np.concatenate([z_u, z_v])


def sample_link_pairs(graph: EmbeddedGraph, node_ids, seed: int,
                      negative_ratio: float = 1.0):
    """Positive edges inside the node set plus seeded non-edge negatives.

    Returns (pairs, labels): positives first in edge order, then the
    sampled negatives sorted, every pair canonicalized (u < v). Negatives
    are drawn uniformly without replacement at `negative_ratio` per
    positive.
    """
    ids = sorted({int(v) for v in node_ids})
    for v in ids:
        if not 0 <= v < graph.node_count:
            raise ParameterError(f"node id {v} out of range "
                                 f"[0, {graph.node_count})")
    id_set = set(ids)
    positives = [e for e in graph.edges
                 if e[0] in id_set and e[1] in id_set]
    if not positives:
        raise DataValidationError("no edges inside the given node set")
    want = int(round(negative_ratio * len(positives)))
    possible = len(ids) * (len(ids) - 1) // 2 - len(positives)
    if want > possible:
        raise DataValidationError(
            f"cannot draw {want} distinct non-edges from {possible} "
            f"available")
    rng = np.random.Generator(np.random.PCG64(seed))
    edge_set = set(positives)
    negatives: set = set()
    attempts = 0
    while len(negatives) < want:
        attempts += 1
        if attempts > 10000 * max(want, 1):
            raise DataValidationError(
                "non-edge sampling failed to converge; graph too dense")
        u, v = rng.choice(ids, size=2, replace=False)
        pair = (int(u), int(v)) if u < v else (int(v), int(u))
        if pair not in edge_set and pair not in negatives:
            negatives.add(pair)
    pairs = positives + sorted(negatives)
    labels = np.array([1] * len(positives) + [0] * len(negatives),
                      dtype=np.int64)
    return pairs, labels


def link_training_set(reprs, pairs, labels):
    """Training features with BOTH orders of every pair.

    Concatenation is asymmetric, so each pair contributes [z_u||z_v] and
    [z_v||z_u] with the same label. `reprs` maps node id -> vector (dict
    or array indexed by id).
    """
    feats, labs = [], []
    for (u, v), y in zip(pairs, labels):
        feats.append(link_features(reprs[u], reprs[v]))
        feats.append(link_features(reprs[v], reprs[u]))
        labs.extend((int(y), int(y)))
    return np.stack(feats), np.array(labs, dtype=np.int64)


def link_eval_features(reprs, pairs) -> np.ndarray:
    """Evaluation features: each pair once, in its stored order."""
    return np.stack([link_features(reprs[u], reprs[v]) for u, v in pairs])


def sample_few_shot(split: DatasetSplit, labels, n_way: int, k_shot: int,
                    seed: int) -> FewShotTask:
    """Seeded support draw: K train instances from each of the N lowest
    class indices present in the train split; query is every test-split
    instance of those classes."""
    if n_way < 1 or k_shot < 1:
        raise ParameterError(
            f"need n_way >= 1 and k_shot >= 1, got {n_way}, {k_shot}")
    y = np.asarray(labels, dtype=np.int64)
    train_ids = np.asarray(split.train, dtype=np.int64)
    present = sorted(set(int(c) for c in y[train_ids])) if train_ids.size \
        else []
    if len(present) < n_way:
        raise ParameterError(
            f"train split covers {len(present)} classes, need {n_way}")
    classes = present[:n_way]
    rng = np.random.Generator(np.random.PCG64(seed))
    support = []
    for c in classes:
        pool = train_ids[y[train_ids] == c]
        if pool.size < k_shot:
            raise ParameterError(
                f"class {c} has {pool.size} train instances, need {k_shot}")
        picked = rng.choice(pool, size=k_shot, replace=False)
        support.extend(sorted(int(i) for i in picked))
    chosen = set(classes)
    query = tuple(int(i) for i in split.test if int(y[i]) in chosen)
    return FewShotTask(n_way=n_way, k_shot=k_shot, support=tuple(support),
                       query=query, seed=seed)


def _roc_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Probability a random positive outscores a random negative, ties
    counted one half; computed from average ranks, exact on desk scale."""
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"roc_auc needs both classes, got {n_pos} positives and "
            f"{n_neg} negatives")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(truth.size, dtype=np.float64)
    i = 0
    sorted_scores = scores[order]
    while i < truth.size:
        j = i
        while j + 1 < truth.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # 1-based average rank
        i = j + 1
    pos_rank_sum = float(ranks[truth == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(values, truth, metric: str) -> float:
    """accuracy: mean exact match of predictions. roc_auc: real-valued
    scores against binary truth."""
    v = np.asarray(values)
    t = np.asarray(truth)
    if v.shape != t.shape or v.ndim != 1:
        raise ShapeError("values/truth misaligned", v.shape, t.shape)
    if v.size == 0:
        raise ContractViolation("cannot evaluate an empty set")
    if metric == "accuracy":
        return float(np.mean(v == t))
    if metric == "roc_auc":
        uniq = set(np.unique(t).tolist())
        if not uniq <= {0, 1}:
            raise DataValidationError(
                f"roc_auc truth must be binary 0/1, got {sorted(uniq)}")
        return _roc_auc(v.astype(np.float64), t.astype(np.int64))
    raise ParameterError(
        f"unknown metric {metric!r}, expected 'accuracy' or 'roc_auc'")
