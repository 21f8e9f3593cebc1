"""Encoder backends: a pinned sentence-transformer and an offline stand-in.

`load_encoder` picks by name. Every backend exposes `dim` and
`encode(texts) -> float32 array (len(texts), dim)`, deterministic for a
fixed input list.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import EncoderError

# Pinned checkpoint. The upstream work names the encoder family but not
# an exact checkpoint; this is the common lightweight default.
DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


class HashEncoder:
    """Deterministic content-hash embeddings for offline use.

    Each text maps to a fixed unit vector seeded by its hash. Carries no
    semantics; it exists so pipelines and format contracts can be
    exercised without model weights. Select with the name "hash:<dim>".
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise EncoderError(f"hash encoder dim must be >= 1, got {dim}")
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    def encode(self, texts) -> np.ndarray:
        rows = np.empty((len(texts), self._dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode("utf-8"),
                                     digest_size=16).digest()
            rng = np.random.Generator(np.random.PCG64(
                int.from_bytes(digest, "little")))
            v = rng.standard_normal(self._dim)
            norm = float(np.linalg.norm(v))
            if norm > 0.0:
                v /= norm
            rows[i] = v.astype(np.float32)
        return rows


class SentenceTransformerEncoder:
    """Thin wrapper over a sentence-transformers checkpoint on CPU."""

    def __init__(self, name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                f"sentence-transformers is not installed: {exc}") from exc
        try:
            self._model = SentenceTransformer(name, device="cpu")
        except Exception as exc:
            raise EncoderError(
                f"cannot load encoder {name!r}: {exc}") from exc
        self._dim = int(self._model.get_sentence_embedding_dimension())

    @property
    def dim(self) -> int:
        return self._dim

    def encode(self, texts) -> np.ndarray:
        out = self._model.encode(list(texts), batch_size=len(texts),
                                 convert_to_numpy=True,
                                 show_progress_bar=False)
        return np.asarray(out, dtype=np.float32)


def load_encoder(name: str):
    """Backend by name: "hash:<dim>" or a sentence-transformers id."""
    if name.startswith("hash:"):
        suffix = name[len("hash:"):]
        try:
            dim = int(suffix)
        except ValueError:
            raise EncoderError(
                f"hash encoder needs an integer dim, got {suffix!r}")
        return HashEncoder(dim)
    return SentenceTransformerEncoder(name)
