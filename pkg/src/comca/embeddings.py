"""Embedding containers, identifier bookkeeping, and vector kernels.

Embeddings are held in float64 internally for deterministic comparisons;
the interchange container stores float32 (see `write_container`).
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ComcaWarning,
    ContainerFormat,
    DimMismatch,
    ZeroVector,
)

MAGIC = b"COMCAEMB"
CONTAINER_VERSION = 1

KIND_IMAGE = 0
KIND_TEXT = 1
KIND_LABELS = 2

_KIND_NAMES = {KIND_IMAGE: "image", KIND_TEXT: "text", KIND_LABELS: "labels"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}

NORM_TOL = 1e-5
ZERO_TOL = 1e-12


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm, preserving direction.

    Raises ZeroVector when the norm is at or below 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_TOL:
        raise ZeroVector(f"cannot normalize vector with norm {norm}")
    return v / norm


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(f"vector lengths differ: {u.shape} vs {v.shape}")
    return float(np.clip(np.dot(u, v), -1.0, 1.0))


@dataclass
class EmbeddingMatrix:
    """n rows of d-dimensional unit vectors with stable string ids."""

    ids: list[str]
    data: np.ndarray  # (n, d) float64, unit rows
    kind: str = "image"

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ContainerFormat(f"expected 2-D data, got shape {self.data.shape}")
        if len(self.ids) != self.data.shape[0]:
            raise ContainerFormat(
                f"{len(self.ids)} ids for {self.data.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ContainerFormat("duplicate embedding ids")
        if any(not i for i in self.ids):
            raise ContainerFormat("empty embedding id")
        if self.kind not in ("image", "text"):
            raise ContainerFormat(f"unknown embedding kind {self.kind!r}")
        self._check_norms()
        self._index = {id_: row for row, id_ in enumerate(self.ids)}

    def _check_norms(self):
        if self.data.shape[0] == 0:
            return
        norms = np.linalg.norm(self.data, axis=1)
        if np.any(norms <= ZERO_TOL):
            bad = int(np.argmax(norms <= ZERO_TOL))
            raise ZeroVector(f"row {bad} ({self.ids[bad]!r}) has zero norm")
        off = np.abs(norms - 1.0) > NORM_TOL
        if np.any(off):
            warnings.warn(
                f"{int(off.sum())} rows off unit norm beyond {NORM_TOL}; "
                "re-normalizing", ComcaWarning)
            self.data = self.data / norms[:, None]

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def row(self, id_: str) -> np.ndarray:
        return self.data[self._index[id_]]

    def index_of(self, id_: str) -> int:
        return self._index[id_]

    def __contains__(self, id_: str) -> bool:
        return id_ in self._index


@dataclass
class AttributeEntry:
    name: str
    prompt_type: str = "is"  # "is" | "has"
    synonyms: list[str] = field(default_factory=list)
    bucket: str = "unknown"  # head | medium | tail | unknown

    def __post_init__(self):
        if self.prompt_type not in ("is", "has"):
            raise ContainerFormat(f"bad attribute type {self.prompt_type!r}")
        if self.bucket not in ("head", "medium", "tail", "unknown"):
            raise ContainerFormat(f"bad bucket {self.bucket!r}")


@dataclass
class Vocabulary:
    """Target attribute and object lists."""

    attributes: list[AttributeEntry]
    objects: list[str]

    def __post_init__(self):
        if not self.attributes or not self.objects:
            raise ContainerFormat("vocabulary needs at least one attribute and object")
        lower_attrs = [a.name.lower() for a in self.attributes]
        if len(set(lower_attrs)) != len(lower_attrs):
            raise ContainerFormat("attribute names collide after lowercasing")
        lower_objs = [o.lower() for o in self.objects]
        if len(set(lower_objs)) != len(lower_objs):
            raise ContainerFormat("object names collide after lowercasing")

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @classmethod
    def from_json(cls, path: str | Path) -> "Vocabulary":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        attrs = [
            AttributeEntry(
                name=a["name"],
                prompt_type=a.get("type", "is"),
                synonyms=list(a.get("synonyms", [])),
                bucket=a.get("bucket", "unknown"),
            )
            for a in raw["attributes"]
        ]
        return cls(attributes=attrs, objects=list(raw["objects"]))

    def to_json(self, path: str | Path):
        payload = {
            "attributes": [
                {"name": a.name, "type": a.prompt_type,
                 "synonyms": a.synonyms, "bucket": a.bucket}
                for a in self.attributes
            ],
            "objects": self.objects,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def similarity_matrix(rows: EmbeddingMatrix, cols: EmbeddingMatrix) -> np.ndarray:
    """Pairwise cosine matrix; entry (i, j) = cosine(rows[i], cols[j])."""
    if rows.dim != cols.dim:
        raise DimMismatch(f"dims differ: {rows.dim} vs {cols.dim}")
    sims = rows.data @ cols.data.T
    return np.clip(sims, -1.0, 1.0)


# --- binary container IO -------------------------------------------------
#
# Layout: 8 magic bytes "COMCAEMB", then little-endian u32 fields
# (version=1, kind, n, d), then n*d float32 values row-major.
# Ids live in a companion "<path>.ids.jsonl" with one {"row":, "id":}
# object per line, UTF-8, LF endings.

_HEADER = struct.Struct("<8sLLLL")


def write_container_raw(path: str | Path, data: np.ndarray, ids: list[str],
                        kind_code: int):
    """Write raw matrix + ids without norm enforcement (used for labels too)."""
    path = Path(path)
    data32 = np.ascontiguousarray(data, dtype="<f4")
    n, d = data32.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, CONTAINER_VERSION, kind_code, n, d))
        fh.write(data32.tobytes(order="C"))
    with open(str(path) + ".ids.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for row, id_ in enumerate(ids):
            fh.write(json.dumps({"row": row, "id": id_}, ensure_ascii=False) + "\n")


def read_container_raw(path: str | Path) -> tuple[np.ndarray, list[str], int]:
    """Read the binary container; returns (float64 data, ids, kind code)."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise ContainerFormat(f"{path}: truncated header")
    magic, version, kind, n, d = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ContainerFormat(f"{path}: bad magic {magic!r}")
    if version != CONTAINER_VERSION:
        raise ContainerFormat(f"{path}: unsupported version {version}")
    expect = _HEADER.size + 4 * n * d
    if len(blob) != expect:
        raise ContainerFormat(
            f"{path}: payload is {len(blob)} bytes, expected {expect}")
    raw = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    data = raw.reshape(n, d).astype(np.float64)

    ids_path = Path(str(path) + ".ids.jsonl")
    if not ids_path.exists():
        raise ContainerFormat(f"missing ids manifest {ids_path}")
    ids: list[str] = []
    with open(ids_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["row"] != len(ids):
                raise ContainerFormat(
                    f"{ids_path}:{lineno + 1}: row {rec['row']} out of order")
            ids.append(rec["id"])
    if len(ids) != n:
        raise ContainerFormat(f"{ids_path}: {len(ids)} ids for {n} rows")
    return data, ids, kind


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path):
    write_container_raw(path, matrix.data, matrix.ids, _KIND_CODES[matrix.kind])


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    data, ids, kind = read_container_raw(path)
    if kind not in (KIND_IMAGE, KIND_TEXT):
        raise ContainerFormat(
            f"{path}: kind {kind} is not an embedding container")
    return EmbeddingMatrix(ids=ids, data=data, kind=_KIND_NAMES[kind])
