"""The encoding model.

For one anchored instance and a catalog of C candidate classes the model
builds C fused vectors (anchor representation plus a scaled class
embedding), scores every neighbor against each fused vector with additive
attention (a shared score vector over two learned projections, rectified
*before* exponentiation), mixes the fused vector with the attention-weighted
neighbor sum, and applies an output transform. All gradients are analytic;
`encode_grad` backpropagates upstream cotangents through the full chain and
is checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .numerics import as_matrix, as_vector, relu, softmax, softmax_rows
from .subgraph import AnchorTask
from .graph_store import ClassCatalog

__all__ = [
    "EncoderParams",
    "Hyper",
    "SuperNodeBundle",
    "init_encoder_params",
    "params_to_list",
    "params_from_list",
    "build_super_nodes",
    "attention_weights",
    "encode",
    "encode_grad",
]


@dataclass(frozen=True)
class EncoderParams:
    """The four learnable tensors.

    self_proj and neighbor_proj (both d x d) feed the attention score:
    a raw score is score_vec[:d] . (self_proj @ fused) +
    score_vec[d:] . (neighbor_proj @ neighbor). out_proj (d x d) maps the
    mixed vector to the final encoding. score_vec has length 2d.
    """

    self_proj: np.ndarray
    neighbor_proj: np.ndarray
    out_proj: np.ndarray
    score_vec: np.ndarray

    def __post_init__(self):
        sp = as_matrix(self.self_proj)
        d = sp.shape[0]
        if sp.shape != (d, d):
            raise ShapeError("self_proj must be square", sp.shape, (d, d))
        as_matrix(self.neighbor_proj, d, d)
        as_matrix(self.out_proj, d, d)
        as_vector(self.score_vec, 2 * d)
        object.__setattr__(self, "self_proj", sp)
        object.__setattr__(self, "neighbor_proj",
                           np.asarray(self.neighbor_proj, dtype=np.float64))
        object.__setattr__(self, "out_proj",
                           np.asarray(self.out_proj, dtype=np.float64))
        object.__setattr__(self, "score_vec",
                           np.asarray(self.score_vec, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.self_proj.shape[0]


@dataclass(frozen=True)
class Hyper:
    """Model hyper-parameters.

    alpha scales the class embedding added to the anchor; beta in [0, 1]
    weighs the fused vector against the neighbor aggregate; tau > 0 is the
    contrastive temperature; threshold in (0, 1) is the link decision
    cutoff; hops >= 1 is the neighborhood radius.
    """

    alpha: float
    beta: float
    tau: float
    threshold: float
    hops: int = 1

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ParameterError(f"alpha must be finite, got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if not 0.0 < self.threshold < 1.0:
            raise ParameterError(
                f"threshold must lie in (0, 1), got {self.threshold}")
        if self.hops < 1:
            raise ParameterError(f"hops must be >= 1, got {self.hops}")


@dataclass(frozen=True)
class SuperNodeBundle:
    """Per-class encodings of one anchored instance.

    pre[j] is the fused vector for class j before encoding, post[j] the
    encoded output, attention[j] the weights over the instance's neighbors
    (a (C, 0) array when the neighborhood is empty, otherwise each row is a
    probability vector).
    """

    pre: np.ndarray
    post: np.ndarray
    attention: np.ndarray

    def __post_init__(self):
        pre = as_matrix(self.pre)
        as_matrix(self.post, pre.shape[0], pre.shape[1])
        att = np.asarray(self.attention, dtype=np.float64)
        if att.ndim != 2 or att.shape[0] != pre.shape[0]:
            raise ShapeError("attention rows must match class count",
                             att.shape, (pre.shape[0], None))
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post",
                           np.asarray(self.post, dtype=np.float64))
        object.__setattr__(self, "attention", att)

    @property
    def num_classes(self) -> int:
        return self.pre.shape[0]


def init_encoder_params(dim: int, seed: int) -> EncoderParams:
    """Seeded uniform initialization on +-sqrt(6 / (fan_in + fan_out)).

    The square transforms use fan_in = fan_out = dim; the score vector is
    treated as a 2d x 1 map. Draw order is fixed (self_proj, neighbor_proj,
    out_proj, score_vec) so a seed pins every entry.
    """
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    rng = np.random.Generator(np.random.PCG64(seed))
    b_sq = np.sqrt(6.0 / (dim + dim))
    b_g = np.sqrt(6.0 / (2 * dim + 1))
    return EncoderParams(
        self_proj=rng.uniform(-b_sq, b_sq, size=(dim, dim)),
        neighbor_proj=rng.uniform(-b_sq, b_sq, size=(dim, dim)),
        out_proj=rng.uniform(-b_sq, b_sq, size=(dim, dim)),
        score_vec=rng.uniform(-b_g, b_g, size=2 * dim),
    )


def params_to_list(params: EncoderParams) -> list[np.ndarray]:
    """Fixed flattening order shared by the optimizer and the checkpoint."""
    return [params.self_proj, params.neighbor_proj, params.out_proj,
            params.score_vec]


def params_from_list(arrays: list[np.ndarray]) -> EncoderParams:
    if len(arrays) != 4:
        raise ShapeError("expected 4 parameter tensors", len(arrays), 4)
    return EncoderParams(self_proj=arrays[0], neighbor_proj=arrays[1],
                         out_proj=arrays[2], score_vec=arrays[3])


def build_super_nodes(anchor: AnchorTask, catalog: ClassCatalog,
                      alpha: float) -> np.ndarray:
    """Fused vectors: row j = anchor_repr + alpha * class_embeddings[j].

    Pure elementwise arithmetic, so the identity
    pre[j] - anchor_repr - alpha * class_embeddings[j] == 0 holds exactly.
    """
    a = as_vector(anchor.anchor_repr)
    cls = as_matrix(catalog.class_embeddings)
    if cls.shape[1] != a.shape[0]:
        raise ShapeError("anchor/class embedding dimension mismatch",
                         a.shape, cls.shape)
    return a[None, :] + alpha * cls


def attention_weights(fused: np.ndarray, neighbors: np.ndarray,
                      params: EncoderParams) -> np.ndarray:
    """Neighbor weights for one fused vector.

    Raw score per neighbor u: score_vec . concat(self_proj @ fused,
    neighbor_proj @ u), rectified, then softmaxed. Rectification happens
    before exponentiation, so all-negative raw scores give uniform weights.
    Empty neighbor set -> empty weight vector.
    """
    d = params.dim
    fused = as_vector(fused, d)
    nbr = np.asarray(neighbors, dtype=np.float64)
    if nbr.size == 0:
        return np.zeros(0)
    nbr = as_matrix(nbr, cols=d)
    g_self = params.score_vec[:d]
    g_nbr = params.score_vec[d:]
    raw = g_self @ (params.self_proj @ fused) + (nbr @ params.neighbor_proj.T) @ g_nbr
    return softmax(relu(raw))


def _check_encode_shapes(anchor: AnchorTask, catalog: ClassCatalog,
                         params: EncoderParams) -> int:
    d = params.dim
    if anchor.anchor_repr.shape[0] != d:
        raise ShapeError("anchor dimension does not match parameters",
                         anchor.anchor_repr.shape, (d,))
    if catalog.dim != d:
        raise ShapeError("catalog dimension does not match parameters",
                         (catalog.dim,), (d,))
    if anchor.neighbor_reprs.shape[0] and anchor.neighbor_reprs.shape[1] != d:
        raise ShapeError("neighbor dimension does not match parameters",
                         anchor.neighbor_reprs.shape, (None, d))
    return d


def _forward(anchor: AnchorTask, catalog: ClassCatalog,
             params: EncoderParams, hyper: Hyper):
    """Shared straight-line forward pass; returns every intermediate.

    P: (C, d) fused vectors. X: (m, d) neighbors. SP/NP: their projections
    through self_proj/neighbor_proj. E: (C, m) raw scores. A: (C, m)
    weights. T: (C, d) mixed vectors. H: (C, d) outputs.
    """
    d = _check_encode_shapes(anchor, catalog, params)
    P = build_super_nodes(anchor, catalog, hyper.alpha)
    X = anchor.neighbor_reprs
    C, m = P.shape[0], X.shape[0]
    SP = P @ params.self_proj.T
    g_self = params.score_vec[:d]
    g_nbr = params.score_vec[d:]
    if m == 0:
        E = np.zeros((C, 0))
        A = np.zeros((C, 0))
        agg = np.zeros((C, d))  # empty neighborhood contributes nothing
        NP = np.zeros((0, d))
    else:
        NP = X @ params.neighbor_proj.T
        E = (SP @ g_self)[:, None] + (NP @ g_nbr)[None, :]
        A = softmax_rows(relu(E))
        agg = A @ X
    T = hyper.beta * P + (1.0 - hyper.beta) * agg
    H = T @ params.out_proj.T
    return P, X, SP, NP, E, A, T, H


def encode(anchor: AnchorTask, catalog: ClassCatalog,
           params: EncoderParams, hyper: Hyper) -> SuperNodeBundle:
    """Encode one anchored instance against every class in the catalog."""
    P, _, _, _, _, A, _, H = _forward(anchor, catalog, params, hyper)
    return SuperNodeBundle(pre=P, post=H, attention=A)


def encode_grad(anchor: AnchorTask, catalog: ClassCatalog,
                params: EncoderParams, hyper: Hyper,
                upstream: np.ndarray) -> EncoderParams:
    """Parameter gradients of sum_j upstream[j] . post[j].

    Returns an EncoderParams holding the gradient for each tensor. The
    rectifier's subgradient at exactly 0 is taken as 0; with beta = 1 the
    attention path is unused and every gradient except out_proj's is zero.
    """
    P, X, SP, NP, E, A, T, H = _forward(anchor, catalog, params, hyper)
    U = as_matrix(upstream, H.shape[0], H.shape[1])
    d = params.dim
    m = X.shape[0]

    g_out = U.T @ T  # d(sum U.H)/d(out_proj), since H = T @ out_proj.T
    if m == 0:
        zero = np.zeros((d, d))
        return EncoderParams(self_proj=zero, neighbor_proj=zero.copy(),
                             out_proj=g_out, score_vec=np.zeros(2 * d))

    V = U @ params.out_proj                     # cotangent on T, rows (C, d)
    dA = (1.0 - hyper.beta) * (V @ X.T)         # cotangent on weights (C, m)
    # Softmax rows: dr = a * (da - sum_u a_u da_u), then the rectifier mask.
    dR = A * (dA - np.sum(A * dA, axis=1, keepdims=True))
    D = dR * (E > 0)
    row = D.sum(axis=1)                         # per-class total, length C
    col = D.sum(axis=0)                         # per-neighbor total, length m

    g_self_vec = SP.T @ row                     # d/d score_vec[:d]
    g_nbr_vec = NP.T @ col                      # d/d score_vec[d:]
    g_sp = np.outer(params.score_vec[:d], P.T @ row)
    g_np = np.outer(params.score_vec[d:], X.T @ col)
    return EncoderParams(self_proj=g_sp, neighbor_proj=g_np, out_proj=g_out,
                         score_vec=np.concatenate([g_self_vec, g_nbr_vec]))
