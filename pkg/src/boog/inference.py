"""Frozen-model inference.

After encoding, each instance has one output per candidate class; the
final representation is the output whose cosine similarity to its own
class embedding is highest. That argmax is also the zero-shot class
prediction; for links, two nodes are predicted connected when their final
representations' cosine similarity strictly exceeds a threshold.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .encoder import encode
from .errors import ParameterError, ShapeError
from .graph_store import ClassCatalog, EmbeddedGraph
from .numerics import cosine_sim
from .pretrain import Checkpoint
from .subgraph import AnchorTask, node_anchor

__all__ = [
    "MatchResult",
    "similarity_match",
    "match_instances",
    "zero_shot_classify",
    "link_scores",
    "zero_shot_link",
]


@dataclass(frozen=True)
class MatchResult:
    """Winning class index, its encoding, and all per-class scores.

    Ties break to the lowest index so reruns cannot disagree.
    """

    chosen_index: int
    final_repr: np.ndarray
    similarity_scores: np.ndarray


def similarity_match(bundle, catalog: ClassCatalog) -> MatchResult:
    """Pick the class whose encoding best matches its own class embedding."""
    if bundle.num_classes != catalog.num_classes:
        raise ShapeError("bundle/catalog class count mismatch",
                         bundle.num_classes, catalog.num_classes)
    if bundle.post.shape[1] != catalog.dim:
        raise ShapeError("bundle/catalog dimension mismatch",
                         bundle.post.shape, (None, catalog.dim))
    scores = np.array([cosine_sim(bundle.post[j], catalog.class_embeddings[j])
                       for j in range(catalog.num_classes)])
    chosen = int(np.argmax(scores))  # argmax returns the first maximum
    return MatchResult(chosen_index=chosen,
                       final_repr=bundle.post[chosen].copy(),
                       similarity_scores=scores)


def _check_checkpoint_dim(catalog: ClassCatalog,
                          checkpoint: Checkpoint) -> None:
    if catalog.dim != checkpoint.params.dim:
        raise ShapeError("checkpoint/catalog dimension mismatch",
                         (checkpoint.params.dim,), (catalog.dim,))


def match_instances(instances: list[AnchorTask], catalog: ClassCatalog,
                    checkpoint: Checkpoint) -> list[MatchResult]:
    """Encode and match every instance with the frozen parameters."""
    _check_checkpoint_dim(catalog, checkpoint)
    return [similarity_match(
        encode(a, catalog, checkpoint.params, checkpoint.hyper), catalog)
        for a in instances]


def zero_shot_classify(instances: list[AnchorTask], catalog: ClassCatalog,
                       checkpoint: Checkpoint) -> np.ndarray:
    """Predicted class index per instance, no training involved."""
    return np.array([m.chosen_index
                     for m in match_instances(instances, catalog, checkpoint)],
                    dtype=np.int64)


def _content_key(graph: EmbeddedGraph, catalog: ClassCatalog,
                 checkpoint: Checkpoint) -> str:
    """Hash of everything the per-node representations depend on."""
    h = hashlib.blake2b(digest_size=16)
    for tensor in (checkpoint.params.self_proj, checkpoint.params.neighbor_proj,
                   checkpoint.params.out_proj, checkpoint.params.score_vec):
        h.update(np.ascontiguousarray(tensor).tobytes())
    hp = checkpoint.hyper
    h.update(repr((hp.alpha, hp.beta, hp.tau, hp.hops)).encode())
    h.update(np.ascontiguousarray(graph.embeddings).tobytes())
    h.update(repr(graph.edges).encode())
    h.update(np.ascontiguousarray(catalog.class_embeddings).tobytes())
    return h.hexdigest()


# Per-node final representations are pure in (graph, catalog, checkpoint),
# so they are memoized on a content hash; a small LRU keeps one process
# from growing without bound across datasets.
_REPR_CACHE: OrderedDict[str, dict[int, np.ndarray]] = OrderedDict()
_REPR_CACHE_LIMIT = 8


def _node_reprs(graph: EmbeddedGraph, catalog: ClassCatalog,
                checkpoint: Checkpoint, nodes) -> dict[int, np.ndarray]:
    key = _content_key(graph, catalog, checkpoint)
    if key in _REPR_CACHE:
        _REPR_CACHE.move_to_end(key)
    else:
        _REPR_CACHE[key] = {}
        while len(_REPR_CACHE) > _REPR_CACHE_LIMIT:
            _REPR_CACHE.popitem(last=False)
    cache = _REPR_CACHE[key]
    for v in nodes:
        if v not in cache:
            anchor = node_anchor(graph, catalog, v, checkpoint.hyper.hops)
            bundle = encode(anchor, catalog, checkpoint.params,
                            checkpoint.hyper)
            cache[v] = similarity_match(bundle, catalog).final_repr
    return cache


def link_scores(pairs, graph: EmbeddedGraph, catalog: ClassCatalog,
                checkpoint: Checkpoint) -> np.ndarray:
    """Cosine similarity of the two endpoints' final representations.

    Each node's representation uses its own neighborhood, independent of
    the partner node, and is computed at most once per (graph, catalog,
    checkpoint) content.
    """
    _check_checkpoint_dim(catalog, checkpoint)
    wanted = sorted({int(u) for pair in pairs for u in pair})
    reprs = _node_reprs(graph, catalog, checkpoint, wanted)
    return np.array([cosine_sim(reprs[int(u)], reprs[int(v)])
                     for u, v in pairs])


def zero_shot_link(pairs, graph: EmbeddedGraph, catalog: ClassCatalog,
                   checkpoint: Checkpoint, threshold: float) -> np.ndarray:
    """1 where the endpoint similarity strictly exceeds the threshold.

    A similarity exactly equal to the threshold is predicted 0.
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError(
            f"threshold must lie in (0, 1), got {threshold}")
    sims = link_scores(pairs, graph, catalog, checkpoint)
    return (sims > threshold).astype(np.int64)
