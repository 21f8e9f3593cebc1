"""Data model for embedded text-attributed graphs plus file ingestion.

Covers the dataset JSON format, the `BOOGEMB1` binary embedding
interchange format, the deterministic stub embedder used at desk scale,
and the synthetic dataset generator behind the acceptance runs.

Datasets are immutable after load; every invariant is enforced here so
downstream modules never re-validate.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataValidationError, FileFormatError, ParameterError

__all__ = [
    "EmbeddedGraph",
    "ClassCatalog",
    "GraphCollection",
    "DatasetSplit",
    "TASKS",
    "load_dataset",
    "save_dataset",
    "stub_embed",
    "save_embeddings",
    "load_embeddings",
    "generate_synthetic",
    "profile_task",
]

TASKS = ("node", "graph", "link")

EMB_MAGIC = b"BOOGEMB1"


@dataclass
class EmbeddedGraph:
    """Undirected graph with one embedding row per node.

    edges are canonicalized to sorted (u, v) pairs with u < v; labels,
    when present, hold one class index (or None) per node.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    embeddings: np.ndarray  # (node_count, dim) float64
    labels: tuple[int | None, ...] | None = None
    _adjacency: tuple[tuple[int, ...], ...] | None = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.node_count < 0:
            raise DataValidationError("node_count must be non-negative")
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] != self.node_count:
            raise DataValidationError(
                f"embeddings must be ({self.node_count}, dim), got {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise DataValidationError("embeddings contain non-finite entries")
        self.embeddings = emb
        seen = set()
        canon = []
        for i, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.node_count) or not (0 <= v < self.node_count):
                raise DataValidationError(
                    f"edge {i}: dangling endpoint ({u}, {v}) "
                    f"in a {self.node_count}-node graph")
            if u == v:
                raise DataValidationError(f"edge {i}: self-loop at node {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DataValidationError(f"edge {i}: duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        self.edges = tuple(canon)
        if self.labels is not None:
            self.labels = tuple(self.labels)
            if len(self.labels) != self.node_count:
                raise DataValidationError(
                    f"labels has {len(self.labels)} entries for "
                    f"{self.node_count} nodes")

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        """Neighbor lists in ascending node-id order, built once."""
        if self._adjacency is None:
            nbrs: list[list[int]] = [[] for _ in range(self.node_count)]
            for u, v in self.edges:
                nbrs[u].append(v)
                nbrs[v].append(u)
            self._adjacency = tuple(tuple(sorted(ns)) for ns in nbrs)
        return self._adjacency


@dataclass
class ClassCatalog:
    """Ordered class names with one embedding row per class."""

    class_names: tuple[str, ...]
    class_embeddings: np.ndarray  # (C, dim) float64

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        emb = np.asarray(self.class_embeddings, dtype=np.float64)
        if len(self.class_names) < 1:
            raise DataValidationError("catalog needs at least one class")
        if emb.ndim != 2 or emb.shape[0] != len(self.class_names):
            raise DataValidationError(
                f"class embeddings must be ({len(self.class_names)}, dim), "
                f"got {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise DataValidationError("class embeddings contain non-finite entries")
        self.class_embeddings = emb

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.class_embeddings.shape[1]


@dataclass
class GraphCollection:
    graphs: list[EmbeddedGraph]
    graph_labels: tuple[int | None, ...] | None = None

    def __post_init__(self):
        if self.graph_labels is not None:
            self.graph_labels = tuple(self.graph_labels)
            if len(self.graph_labels) != len(self.graphs):
                raise DataValidationError(
                    f"graph_labels has {len(self.graph_labels)} entries for "
                    f"{len(self.graphs)} graphs")


@dataclass
class DatasetSplit:
    """Disjoint train/val/test id sets: node ids for node/link tasks,
    graph ids for graph tasks."""

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        self.train = tuple(self.train)
        self.val = tuple(self.val)
        self.test = tuple(self.test)
        tr, va, te = set(self.train), set(self.val), set(self.test)
        if tr & va or tr & te or va & te:
            raise DataValidationError("splits are not pairwise disjoint")


def _validate_against_catalog(collection: GraphCollection,
                              catalog: ClassCatalog,
                              split: DatasetSplit, task: str) -> None:
    c = catalog.num_classes
    d = catalog.dim
    for gi, g in enumerate(collection.graphs):
        if g.node_count and g.dim != d:
            raise DataValidationError(
                f"graph {gi}: node embedding dim {g.dim} != class dim {d}")
        if g.labels is not None:
            for ni, lab in enumerate(g.labels):
                if lab is not None and not (0 <= lab < c):
                    raise DataValidationError(
                        f"graph {gi}, node {ni}: label {lab} out of range "
                        f"[0, {c})")
    if collection.graph_labels is not None:
        for gi, lab in enumerate(collection.graph_labels):
            if lab is not None and not (0 <= lab < c):
                raise DataValidationError(
                    f"graph {gi}: graph label {lab} out of range [0, {c})")
    if task in ("node", "link"):
        if len(collection.graphs) != 1:
            raise DataValidationError(
                f"{task}-task dataset must contain exactly one graph, "
                f"got {len(collection.graphs)}")
        limit = collection.graphs[0].node_count
    else:
        limit = len(collection.graphs)
    for name, ids in (("train", split.train), ("val", split.val),
                      ("test", split.test)):
        for i in ids:
            if not (0 <= i < limit):
                raise DataValidationError(
                    f"split {name}: id {i} out of range [0, {limit})")


def load_dataset(path) -> tuple[GraphCollection, ClassCatalog, DatasetSplit, str]:
    """Load and fully validate a dataset JSON file.

    Returns (collection, catalog, split, task). Invariant violations
    raise DataValidationError naming the offending record; unreadable or
    unparseable files raise FileFormatError / FileNotFoundError.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: not valid JSON ({e})") from e

    try:
        meta = doc["meta"]
        dim = int(meta["dim"])
        num_classes = int(meta["num_classes"])
        task = meta["task"]
        classes = doc["classes"]
        graphs_doc = doc["graphs"]
        splits_doc = doc["splits"]
    except (KeyError, TypeError) as e:
        raise DataValidationError(f"{path}: missing required field {e}") from e
    if task not in TASKS:
        raise DataValidationError(f"meta.task must be one of {TASKS}, got {task!r}")
    if len(classes) != num_classes:
        raise DataValidationError(
            f"meta.num_classes is {num_classes} but {len(classes)} classes given")

    names, emb_rows = [], []
    for j, cls in enumerate(classes):
        try:
            names.append(str(cls["name"]))
            row = [float(x) for x in cls["embedding"]]
        except (KeyError, TypeError, ValueError) as e:
            raise DataValidationError(f"class {j}: malformed record ({e})") from e
        if len(row) != dim:
            raise DataValidationError(
                f"class {j} ({names[-1]!r}): embedding dim {len(row)} != "
                f"meta.dim {dim}")
        emb_rows.append(row)
    catalog = ClassCatalog(tuple(names), np.array(emb_rows, dtype=np.float64)
                           if emb_rows else np.zeros((0, dim)))

    graphs = []
    for gi, gdoc in enumerate(graphs_doc):
        try:
            emb = np.array([[float(x) for x in row]
                            for row in gdoc["embeddings"]], dtype=np.float64)
            edges = [(int(u), int(v)) for u, v in gdoc.get("edges", [])]
            labels_doc = gdoc.get("labels")
        except (KeyError, TypeError, ValueError) as e:
            raise DataValidationError(f"graph {gi}: malformed record ({e})") from e
        n = len(gdoc["embeddings"])
        if emb.size == 0:
            emb = np.zeros((n, dim))
        if n and emb.shape[1] != dim:
            raise DataValidationError(
                f"graph {gi}: node embedding dim {emb.shape[1]} != meta.dim {dim}")
        labels = None
        if labels_doc is not None:
            labels = tuple(None if x is None else int(x) for x in labels_doc)
        try:
            graphs.append(EmbeddedGraph(n, tuple(edges), emb, labels))
        except DataValidationError as e:
            raise DataValidationError(f"graph {gi}: {e}") from e

    graph_labels = None
    if doc.get("graph_labels") is not None:
        graph_labels = tuple(None if x is None else int(x)
                             for x in doc["graph_labels"])
    collection = GraphCollection(graphs, graph_labels)

    try:
        split = DatasetSplit(tuple(int(i) for i in splits_doc["train"]),
                             tuple(int(i) for i in splits_doc["val"]),
                             tuple(int(i) for i in splits_doc["test"]))
    except (KeyError, TypeError, ValueError) as e:
        raise DataValidationError(f"splits: malformed record ({e})") from e

    _validate_against_catalog(collection, catalog, split, task)
    return collection, catalog, split, task


def save_dataset(collection: GraphCollection, catalog: ClassCatalog,
                 split: DatasetSplit, task: str, path) -> None:
    """Write the dataset JSON format; inverse of load_dataset."""
    if task not in TASKS:
        raise ParameterError(f"task must be one of {TASKS}, got {task!r}")
    _validate_against_catalog(collection, catalog, split, task)
    doc = {
        "meta": {"dim": catalog.dim, "num_classes": catalog.num_classes,
                 "task": task},
        "classes": [{"name": name, "embedding": list(map(float, row))}
                    for name, row in zip(catalog.class_names,
                                         catalog.class_embeddings)],
        "graphs": [
            {
                "embeddings": [list(map(float, row)) for row in g.embeddings],
                "edges": [[u, v] for u, v in g.edges],
                "labels": (None if g.labels is None else list(g.labels)),
            }
            for g in collection.graphs
        ],
        "graph_labels": (None if collection.graph_labels is None
                         else list(collection.graph_labels)),
        "splits": {"train": list(split.train), "val": list(split.val),
                   "test": list(split.test)},
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def stub_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic stand-in for a text encoder.

    Each whitespace token is hashed (keyed by the seed) into a stream
    that drives a pseudo-random projection to `dim` entries; token
    vectors are summed and L2-normalized. Same (text, dim, seed) gives a
    bit-identical vector; empty text gives the zero vector.
    """
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    key = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    out = np.zeros(dim, dtype=np.float64)
    for token in text.split():
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8,
                                 key=key).digest()
        token_seed = int.from_bytes(digest, "little")
        rng = np.random.Generator(np.random.PCG64(token_seed))
        out += rng.standard_normal(dim)
    norm = np.linalg.norm(out)
    if norm > 0.0:
        out /= norm
    return out


def save_embeddings(vectors, path, dim: int | None = None) -> None:
    """Write vectors to the BOOGEMB1 binary format (32-bit LE payload).

    `dim` is only required for an empty vector list.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    if vectors:
        dims = {v.shape for v in vectors}
        if any(len(s) != 1 for s in dims) or len(dims) != 1:
            raise ParameterError(f"vectors must share one dim, got {sorted(dims)}")
        dim = vectors[0].shape[0]
    elif dim is None:
        raise ParameterError("dim is required when saving an empty vector list")
    payload = np.array(vectors, dtype="<f4").reshape(len(vectors), dim)
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<II", len(vectors), dim))
        f.write(payload.tobytes(order="C"))


def load_embeddings(path) -> list[np.ndarray]:
    """Read a BOOGEMB1 file; rows come back widened to float64."""
    blob = Path(path).read_bytes()
    if len(blob) < len(EMB_MAGIC) or blob[:len(EMB_MAGIC)] != EMB_MAGIC:
        raise FileFormatError(f"{path}: bad magic bytes")
    header_end = len(EMB_MAGIC) + 8
    if len(blob) < header_end:
        raise FileFormatError(f"{path}: truncated header")
    count, dim = struct.unpack("<II", blob[len(EMB_MAGIC):header_end])
    expected = count * dim * 4
    body = blob[header_end:]
    if len(body) < expected:
        raise FileFormatError(
            f"{path}: truncated payload ({len(body)} bytes, expected {expected})")
    if len(body) > expected:
        raise FileFormatError(
            f"{path}: payload does not match count={count}, dim={dim} "
            f"({len(body) - expected} trailing bytes)")
    flat = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return [flat[i * dim:(i + 1) * dim] for i in range(count)]


PROFILES = ("citation", "molecule")

_MOLECULE_SIZE = 6
# One fixed topology for every molecule-profile graph: a 6-ring plus a chord.
_MOLECULE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3))


def profile_task(profile: str) -> str:
    """Task kind a profile's datasets are written with."""
    return {"citation": "node", "molecule": "graph"}[profile]


def _class_embeddings(rng: np.random.Generator, C: int, d: int) -> np.ndarray:
    """Mutually orthonormal class vectors when d >= C, else unit Gaussians."""
    if C <= d:
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        return q[:, :C].T.copy()
    rows = rng.standard_normal((C, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _three_way_split(rng: np.random.Generator, count: int) -> DatasetSplit:
    perm = rng.permutation(count)
    n_train = max(1, int(round(count * 0.6)))
    n_val = max(1, int(round(count * 0.2)))
    n_train = min(n_train, count - 2) if count >= 3 else n_train
    return DatasetSplit(tuple(int(i) for i in perm[:n_train]),
                        tuple(int(i) for i in perm[n_train:n_train + n_val]),
                        tuple(int(i) for i in perm[n_train + n_val:]))


def generate_synthetic(profile: str, n: int, C: int, d: int, seed: int,
                       noise: float = 0.05, avg_degree: int = 8,
                       catalog: ClassCatalog | None = None,
                       ) -> tuple[GraphCollection, ClassCatalog, DatasetSplit]:
    """Deterministic desk-scale dataset generator.

    "citation" wires one big graph whose edges mostly connect
    embedding-nearest nodes of the same class (clustered, like citation
    networks); "molecule" emits many small graphs sharing one fixed
    topology. Class-j instances get embeddings near the j-th class
    vector, with `noise` controlling the spread. Passing `catalog`
    reuses existing class embeddings so datasets can share label space.
    """
    if profile not in PROFILES:
        raise ParameterError(f"profile must be one of {PROFILES}, got {profile!r}")
    if C < 1 or n < C:
        raise ParameterError(f"need n >= C >= 1, got n={n}, C={C}")
    if noise < 0:
        raise ParameterError(f"noise must be non-negative, got {noise}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if catalog is None:
        catalog = ClassCatalog(
            tuple(f"class-{j}" for j in range(C)),
            _class_embeddings(rng, C, d))
    else:
        if catalog.num_classes != C or catalog.dim != d:
            raise ParameterError(
                f"supplied catalog is {catalog.num_classes} classes x dim "
                f"{catalog.dim}, requested {C} x {d}")

    if profile == "citation":
        labels = np.arange(n) % C
        emb = catalog.class_embeddings[labels] + noise * rng.standard_normal((n, d))
        edges = _citation_edges(rng, emb, labels, avg_degree)
        graph = EmbeddedGraph(n, edges, emb, tuple(int(x) for x in labels))
        collection = GraphCollection([graph])
        split = _three_way_split(rng, n)
        return collection, catalog, split

    n_graphs = n // _MOLECULE_SIZE
    if n_graphs < C:
        raise ParameterError(
            f"molecule profile needs n >= {_MOLECULE_SIZE * C} "
            f"(>= 1 graph of {_MOLECULE_SIZE} nodes per class), got n={n}")
    graphs = []
    glabels = []
    for gi in range(n_graphs):
        label = gi % C
        emb = (catalog.class_embeddings[label]
               + noise * rng.standard_normal((_MOLECULE_SIZE, d)))
        graphs.append(EmbeddedGraph(_MOLECULE_SIZE, _MOLECULE_EDGES, emb))
        glabels.append(label)
    collection = GraphCollection(graphs, tuple(glabels))
    split = _three_way_split(rng, n_graphs)
    return collection, catalog, split


def _citation_edges(rng: np.random.Generator, emb: np.ndarray,
                    labels: np.ndarray, avg_degree: int,
                    ) -> tuple[tuple[int, int], ...]:
    """Intra-class nearest-neighbor edges plus a sprinkle of cross-class
    ones; average degree stays fixed as n grows."""
    n = emb.shape[0]
    edges: set[tuple[int, int]] = set()
    intra_knn = max(1, avg_degree // 2)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            continue
        block = emb[idx]
        sims = block @ block.T
        np.fill_diagonal(sims, -np.inf)
        take = min(intra_knn, idx.size - 1)
        # argsort descending; ties broken by position for determinism
        order = np.argsort(-sims, axis=1, kind="stable")[:, :take]
        for row, nbrs in enumerate(order):
            u = int(idx[row])
            for col in nbrs:
                v = int(idx[col])
                edges.add((min(u, v), max(u, v)))
    n_cross = int(round(0.1 * n * avg_degree / 2))
    attempts = 0
    while n_cross > 0 and attempts < 50 * n_cross:
        u, v = rng.integers(0, n, size=2)
        attempts += 1
        if u == v or labels[u] == labels[v]:
            continue
        key = (int(min(u, v)), int(max(u, v)))
        if key in edges:
            continue
        edges.add(key)
        n_cross -= 1
    return tuple(sorted(edges))
