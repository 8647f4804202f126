"""Writer for the binary embedding interchange format.

Layout: 8 magic bytes "COMCAEMB", little-endian u32 version (=1), u32
kind (0=image, 1=text), u32 n, u32 d, then n*d float32 little-endian
values row-major. Ids go to "<path>.ids.jsonl", one {"row":, "id":}
object per line, UTF-8 with LF endings. Both files are written to
temporaries and renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"COMCAEMB"
VERSION = 1
KIND_IMAGE = 0
KIND_TEXT = 1

_HEADER = struct.Struct("<8sLLLL")


def write_container(path: str | Path, data: np.ndarray, ids: list[str],
                    kind: int):
    path = Path(path)
    data32 = np.ascontiguousarray(data, dtype="<f4")
    if data32.ndim != 2:
        raise ValueError(f"expected 2-D data, got shape {data32.shape}")
    if len(ids) != data32.shape[0]:
        raise ValueError(f"{len(ids)} ids for {data32.shape[0]} rows")
    n, d = data32.shape

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, kind, n, d))
        fh.write(data32.tobytes(order="C"))
    ids_path = Path(str(path) + ".ids.jsonl")
    ids_tmp = ids_path.with_name(ids_path.name + ".tmp")
    with open(ids_tmp, "w", encoding="utf-8", newline="\n") as fh:
        for row, id_ in enumerate(ids):
            fh.write(json.dumps({"row": row, "id": id_},
                                ensure_ascii=False) + "\n")
    os.replace(tmp, path)
    os.replace(ids_tmp, ids_path)
