"""Binary embedding writer.

Layout: 8 magic bytes "BOOGEMB1", then u32 LE count, u32 LE dim, then
count*dim float32 LE values in row-major order. Writes go to a temp file
in the target directory and land via rename, so a failed export never
leaves a partial file at the destination.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"BOOGEMB1"


def write_embeddings(rows: np.ndarray, path) -> None:
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError(f"expected a 2-d row matrix, got shape {rows.shape}")
    count, dim = rows.shape
    path = Path(path)
    payload = rows.astype("<f4").tobytes(order="C")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or ".",
                                    prefix=".emb-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", count, dim))
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
