"""Embedding exporter: raw texts to the BOOGEMB1 binary vector format.

Reads a JSON-lines manifest of {id, text} records, encodes each text
with a sentence encoder (or a deterministic offline stand-in), and
writes one float32 row per record, order preserved. The binary file is
the entire interface to downstream consumers.
"""

from __future__ import annotations

import numpy as np

from .encoders import (DEFAULT_MODEL, HashEncoder,
                       SentenceTransformerEncoder, load_encoder)
from .errors import EncoderError, ManifestError
from .manifest import TextManifest, load_manifest
from .writer import write_embeddings

__version__ = "1.0.0"

__all__ = [
    "DEFAULT_MODEL",
    "EncoderError",
    "HashEncoder",
    "ManifestError",
    "SentenceTransformerEncoder",
    "TextManifest",
    "TEMPLATES",
    "export",
    "load_encoder",
    "load_manifest",
    "write_embeddings",
    "__version__",
]

# Prompt prefixes matching the source-text conventions for each record
# kind; "none" passes texts through untouched.
TEMPLATES = {
    "none": "",
    "node": "Paper title and abstract: ",
    "class": "Literature category of ",
}


def _encode_batch(encoder, batch, records, start):
    """Encode one batch; on failure, name the record that breaks."""
    try:
        out = encoder.encode(batch)
    except EncoderError:
        raise
    except Exception as exc:
        for offset, text in enumerate(batch):
            try:
                encoder.encode([text])
            except Exception as single_exc:
                rid = records[start + offset][0]
                raise EncoderError(
                    f"encoding failed on record id {rid}: {single_exc}"
                ) from single_exc
        raise EncoderError(f"batch encoding failed: {exc}") from exc
    out = np.asarray(out, dtype=np.float32)
    if out.shape != (len(batch), encoder.dim):
        raise EncoderError(
            f"backend returned shape {out.shape}, expected "
            f"({len(batch)}, {encoder.dim})")
    return out


def export(manifest_path, model_name, out_path, batch_size: int = 32,
           template: str = "none") -> dict:
    """Encode every manifest record and write the binary embedding file.

    Returns a summary dict {out, count, dim, model}. Row i of the output
    is the embedding of record i with the template prefix applied.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if template not in TEMPLATES:
        raise ValueError(
            f"template must be one of {sorted(TEMPLATES)}, got {template!r}")
    kind = template if template in ("node", "class") else "node"
    manifest = load_manifest(manifest_path, kind=kind)
    encoder = load_encoder(model_name)
    prefix = TEMPLATES[template]
    texts = [prefix + text for text in manifest.texts]
    blocks = []
    for start in range(0, len(texts), batch_size):
        batch = texts[start:start + batch_size]
        blocks.append(_encode_batch(encoder, batch, manifest.records, start))
    matrix = np.concatenate(blocks, axis=0)
    write_embeddings(matrix, out_path)
    return {"out": str(out_path), "count": len(manifest),
            "dim": encoder.dim, "model": model_name}
