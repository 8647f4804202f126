"""Soft labels for cache entries and their normalization/blending.

The standardized variant centers similarities with cache-wide statistics
before a row softmax; this widens the low-variance similarity range caused
by the image-text modality gap while keeping every row a distribution.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cachebuild import Cache
from .embeddings import EmbeddingMatrix, read_container_raw, write_container_raw, KIND_LABELS
from .errors import (
    AlphaOutOfRange,
    ComcaWarning,
    DegenerateStatistics,
    DimMismatch,
    EmptyCache,
    ShapeMismatch,
)

VARIANTS = ("one_hot", "raw_soft", "softmax_only", "standardized_softmax",
            "blended", "sharpening")

SIGMA_TOL = 1e-9


@dataclass
class LabelMatrix:
    """Per-entry label vectors over the attribute set."""

    values: np.ndarray  # (|cache|, |A|)
    variant: str
    alpha: float = 0.0
    mu: float = math.nan
    sigma: float = math.nan
    soft_variant: str = ""  # pre-blend normalization, when variant == blended
    sum_tol: float = 1e-9   # relaxed to 1e-4 when loaded from f32 interchange

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown label variant {self.variant!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite label values")
        if self.variant == "one_hot":
            ok = np.all(np.isin(self.values, (0.0, 1.0))) and np.all(
                self.values.sum(axis=1) == 1.0)
            if not ok:
                raise ValueError("one_hot rows must contain exactly one 1")
        if self.variant in ("softmax_only", "standardized_softmax"):
            sums = self.values.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > self.sum_tol):
                raise ValueError("softmax label rows must sum to 1")


def raw_soft_labels(cache: Cache, attr_text: EmbeddingMatrix) -> np.ndarray:
    """Cosine of every cache embedding against every attribute text row."""
    if len(cache) == 0:
        raise EmptyCache("cache has no entries")
    emb = cache.embedding_matrix
    if emb.shape[1] != attr_text.dim:
        raise DimMismatch(
            f"cache dim {emb.shape[1]} vs attribute text dim {attr_text.dim}")
    return np.clip(emb @ attr_text.data.T, -1.0, 1.0)


def cache_statistics(raw: np.ndarray) -> tuple[float, float]:
    """Mean and population standard deviation over all entries."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise EmptyCache("empty similarity matrix")
    mu = float(raw.mean())
    sigma = float(raw.std())
    if sigma < SIGMA_TOL:
        raise DegenerateStatistics(
            f"similarity std {sigma} below {SIGMA_TOL}; all entries identical")
    return mu, sigma


def _row_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def normalize_soft_labels(raw: np.ndarray, mode: str) -> np.ndarray:
    """Apply the selected soft-label normalization to raw similarities."""
    raw = np.asarray(raw, dtype=np.float64)
    if mode == "raw_soft":
        return raw.copy()
    if mode == "softmax_only":
        return _row_softmax(raw)
    if mode == "standardized_softmax":
        mu, sigma = cache_statistics(raw)
        return _row_softmax((raw - mu) / sigma)
    if mode == "sharpening":
        raise NotImplementedError(
            "sharpening normalization is defined outside this project")
    raise ValueError(f"unknown normalization mode {mode!r}")


def one_hot_labels(cache: Cache, n_attributes: int | None = None) -> np.ndarray:
    """Hard source-attribute labels; unavailable for image_based caches."""
    if not cache.has_hard_labels:
        raise ValueError("image_based caches carry no hard labels")
    n_attrs = n_attributes or cache.n_attributes
    out = np.zeros((len(cache), n_attrs))
    out[np.arange(len(cache)), cache.attribute_indices] = 1.0
    return out


def blend_labels(one_hot: np.ndarray, soft: np.ndarray, alpha: float) -> np.ndarray:
    """Convex mix (1 - alpha) * one_hot + alpha * soft."""
    one_hot = np.asarray(one_hot, dtype=np.float64)
    soft = np.asarray(soft, dtype=np.float64)
    if one_hot.shape != soft.shape:
        raise ShapeMismatch(f"{one_hot.shape} vs {soft.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha {alpha} outside [0, 1]")
    return (1.0 - alpha) * one_hot + alpha * soft


def make_labels(cache: Cache, attr_text: EmbeddingMatrix,
                variant: str = "standardized_softmax",
                alpha: float = 0.6) -> LabelMatrix:
    """Full labeling pass: raw similarities, normalization, hard-label blend.

    ``variant`` selects the soft normalization; ``one_hot`` skips soft
    labels entirely. Caches without hard labels force alpha to 1.
    """
    if variant == "one_hot":
        return LabelMatrix(values=one_hot_labels(cache), variant="one_hot")
    raw = raw_soft_labels(cache, attr_text)
    mu, sigma = math.nan, math.nan
    if variant == "standardized_softmax":
        mu, sigma = cache_statistics(raw)
    soft = normalize_soft_labels(raw, variant)
    if not cache.has_hard_labels:
        if alpha != 1.0:
            warnings.warn(
                "cache has no hard labels; forcing alpha to 1", ComcaWarning)
        return LabelMatrix(values=soft, variant="blended", alpha=1.0,
                           mu=mu, sigma=sigma, soft_variant=variant)
    hard = one_hot_labels(cache, attr_text.n)
    blended = blend_labels(hard, soft, alpha)
    return LabelMatrix(values=blended, variant="blended", alpha=alpha,
                       mu=mu, sigma=sigma, soft_variant=variant)


def _label_row_ids(cache: Cache) -> list[str]:
    return [f"{e.source_attribute}:{e.image_id}" for e in cache.entries]


def save_labels(labels: LabelMatrix, cache: Cache, path: str | Path):
    """Serialize to the embedding container layout (kind=2) plus sidecar."""
    write_container_raw(path, labels.values, _label_row_ids(cache), KIND_LABELS)
    meta = {
        "variant": labels.variant,
        "soft_variant": labels.soft_variant,
        "alpha": labels.alpha,
        "mu": None if math.isnan(labels.mu) else labels.mu,
        "sigma": None if math.isnan(labels.sigma) else labels.sigma,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def load_labels(path: str | Path) -> LabelMatrix:
    data, _ids, kind = read_container_raw(path)
    if kind != KIND_LABELS:
        raise ValueError(f"{path}: kind {kind} is not a label container")
    meta = json.loads(Path(str(path) + ".meta.json").read_text(encoding="utf-8"))
    return LabelMatrix(
        values=data,
        variant=meta["variant"],
        alpha=meta["alpha"],
        mu=math.nan if meta["mu"] is None else meta["mu"],
        sigma=math.nan if meta["sigma"] is None else meta["sigma"],
        soft_variant=meta.get("soft_variant", ""),
        sum_tol=1e-4,
    )
