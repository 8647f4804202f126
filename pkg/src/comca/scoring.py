"""Attribute scoring: zero-shot, cache baselines, blended-cache, fusion.

The exponential weight eta_c defaults to exp(-beta * (1 - z)); the form
exp(1 + beta * z) that differs by a constant factor is selectable via
``eta_form="paper"``. Cache scoring applies eta to the label-similarity
product by default (``eq10_form="outside"``: eta wraps the product) with
``eq10_form="inside"`` applying eta to the similarity alone and the label
as a linear weight.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import cache_scores as _kernel_scores
from .cachebuild import Cache, build_image_cache
from .embeddings import EmbeddingMatrix, similarity_matrix
from .errors import (
    ComcaWarning,
    DegenerateStatistics,
    DimMismatch,
    EmptyCache,
    NotStochastic,
    PoolExhausted,
    ShapeMismatch,
)
from .labeling import LabelMatrix, make_labels

SCORE_KINDS = ("zero_shot", "cache_tip", "cache_comca", "fused", "iap",
               "image_based")

NORM_MODES = ("none", "min_max", "max_softmax")

ETA_FORMS = ("tip", "paper")
EQ10_FORMS = ("outside", "inside")


@dataclass
class HyperParams:
    """Inference hyperparameters; defaults follow the reference setup."""

    lam: float = 1.17
    beta: float = 1.0
    alpha: float = 0.6
    k: int = 16
    norm_mode: str = "max_softmax"
    eta_form: str = "tip"
    eq10_form: str = "outside"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")
        if self.eta_form not in ETA_FORMS:
            raise ValueError(f"unknown eta form {self.eta_form!r}")
        if self.eq10_form not in EQ10_FORMS:
            raise ValueError(f"unknown eq10 form {self.eq10_form!r}")


@dataclass
class ScoreMatrix:
    instance_ids: list[str]
    attribute_names: list[str]
    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        expected = (len(self.instance_ids), len(self.attribute_names))
        if self.values.shape != expected:
            raise ShapeMismatch(f"values {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite score values")


def eta_c(z: float | np.ndarray, beta: float, form: str = "tip"):
    """Exponential cache weight; see module docstring for the two forms."""
    if form == "tip":
        return np.exp(-beta * (1.0 - np.asarray(z, dtype=np.float64)))
    if form == "paper":
        return np.exp(1.0 + beta * np.asarray(z, dtype=np.float64))
    raise ValueError(f"unknown eta form {form!r}")


def _eta_params(beta: float, form: str) -> tuple[float, float]:
    # eta(z) = exp(u + v*z)
    if form == "tip":
        return -beta, beta
    if form == "paper":
        return 1.0, beta
    raise ValueError(f"unknown eta form {form!r}")


def zero_shot_scores(images: EmbeddingMatrix,
                     attr_prompts: EmbeddingMatrix) -> ScoreMatrix:
    """Cosine of each test image against each attribute prompt embedding."""
    values = similarity_matrix(images, attr_prompts)
    return ScoreMatrix(instance_ids=list(images.ids),
                       attribute_names=list(attr_prompts.ids),
                       values=values, kind="zero_shot")


def _cache_similarities(images: EmbeddingMatrix, cache: Cache) -> np.ndarray:
    emb = cache.embedding_matrix
    if emb.shape[1] != images.dim:
        raise DimMismatch(f"image dim {images.dim} vs cache dim {emb.shape[1]}")
    return np.clip(images.data @ emb.T, -1.0, 1.0)


def tip_cache_scores(images: EmbeddingMatrix, cache: Cache, beta: float,
                     eta_form: str = "tip",
                     attribute_names: list[str] | None = None) -> ScoreMatrix:
    """Per-attribute sum of eta-weighted similarities to same-label entries."""
    if len(cache) == 0:
        raise EmptyCache("cache has no entries")
    if not cache.has_hard_labels:
        raise EmptyCache("tip scoring needs hard labels")
    sim = _cache_similarities(images, cache)
    one_hot = np.zeros((len(cache), cache.n_attributes))
    one_hot[np.arange(len(cache)), cache.attribute_indices] = 1.0
    u, v = _eta_params(beta, eta_form)
    values = _kernel_scores(sim, one_hot, u, v, True)
    names = attribute_names or [str(a) for a in range(cache.n_attributes)]
    return ScoreMatrix(instance_ids=list(images.ids), attribute_names=names,
                       values=values, kind="cache_tip")


def comca_cache_scores(images: EmbeddingMatrix, cache: Cache,
                       labels: LabelMatrix, beta: float,
                       eta_form: str = "tip", eq10_form: str = "outside",
                       attribute_names: list[str] | None = None) -> ScoreMatrix:
    """Blended-label cache scoring: every entry contributes to every attribute."""
    if len(cache) == 0:
        raise EmptyCache("cache has no entries")
    if labels.values.shape[0] != len(cache):
        raise ShapeMismatch(
            f"{labels.values.shape[0]} label rows for {len(cache)} entries")
    sim = _cache_similarities(images, cache)
    u, v = _eta_params(beta, eta_form)
    label_as_weight = eq10_form == "inside"
    values = _kernel_scores(sim, labels.values, u, v, label_as_weight)
    names = attribute_names or [str(a) for a in range(labels.values.shape[1])]
    return ScoreMatrix(instance_ids=list(images.ids), attribute_names=names,
                       values=values, kind="cache_comca")


def _eta_a(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax(z / max(z)); non-positive maxima are shifted to 1e-6."""
    z = np.array(z, dtype=np.float64)
    row_max = z.max(axis=1, keepdims=True)
    degenerate = row_max <= 1e-12
    if np.any(degenerate):
        z = np.where(degenerate, z + (1e-6 - row_max), z)
        row_max = np.where(degenerate, 1e-6, row_max)
    scaled = z / row_max
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def fuse_final(cache_scores: ScoreMatrix, clip_scores: ScoreMatrix,
               lam: float, norm_mode: str = "max_softmax") -> ScoreMatrix:
    """Combine cache and zero-shot scores: z = lam * cache + clip, then norm."""
    if cache_scores.values.shape != clip_scores.values.shape:
        raise ShapeMismatch(
            f"{cache_scores.values.shape} vs {clip_scores.values.shape}")
    if cache_scores.instance_ids != clip_scores.instance_ids:
        raise ShapeMismatch("instance order differs between score matrices")
    z = lam * cache_scores.values + clip_scores.values
    if norm_mode == "none":
        values = z
    elif norm_mode == "min_max":
        lo = z.min(axis=1, keepdims=True)
        hi = z.max(axis=1, keepdims=True)
        span = hi - lo
        # constant rows carry no ranking information; emit zeros
        values = np.where(span > 0, (z - lo) / np.where(span > 0, span, 1.0), 0.0)
    elif norm_mode == "max_softmax":
        values = _eta_a(z)
    else:
        raise ValueError(f"unknown norm mode {norm_mode!r}")
    return ScoreMatrix(instance_ids=list(clip_scores.instance_ids),
                       attribute_names=list(clip_scores.attribute_names),
                       values=values, kind="fused")


def iap_scores(object_scores: ScoreMatrix,
               attr_given_object: np.ndarray,
               attribute_names: list[str] | None = None) -> ScoreMatrix:
    """Indirect prediction: p(a|x) = sum_o p(a|o) p(o|x)."""
    p_obj = object_scores.values
    p_attr = np.asarray(attr_given_object, dtype=np.float64)
    if p_obj.shape[1] != p_attr.shape[0]:
        raise ShapeMismatch(
            f"{p_obj.shape[1]} object scores vs {p_attr.shape[0]} rows")
    if np.any(np.abs(p_obj.sum(axis=1) - 1.0) > 1e-6):
        raise NotStochastic("object score rows must sum to 1")
    if np.any(np.abs(p_attr.sum(axis=1) - 1.0) > 1e-6):
        raise NotStochastic("attribute-given-object rows must sum to 1")
    values = p_obj @ p_attr
    names = attribute_names or [str(a) for a in range(p_attr.shape[1])]
    return ScoreMatrix(instance_ids=list(object_scores.instance_ids),
                       attribute_names=names, values=values, kind="iap")


def attr_given_object_from_compat(phi: np.ndarray) -> np.ndarray:
    """Column-normalize a compatibility matrix into p(attribute | object)."""
    phi = np.asarray(phi, dtype=np.float64)
    col_sums = phi.sum(axis=0, keepdims=True)
    n_attrs = phi.shape[0]
    uniform = np.full_like(phi, 1.0 / n_attrs)
    p = np.where(col_sums > 0, phi / np.where(col_sums > 0, col_sums, 1.0),
                 uniform)
    return p.T  # (|O|, |A|)


def softmax_rows(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def image_based_scores(test_image: np.ndarray, pool: EmbeddingMatrix, k: int,
                       attr_text: EmbeddingMatrix, beta: float,
                       attr_prompts: EmbeddingMatrix | None = None,
                       params: HyperParams | None = None) -> np.ndarray:
    """Per-instance pipeline over a k-nearest cache with pure soft labels.

    attr_prompts (zero-shot branch) defaults to attr_text.
    """
    params = params or HyperParams(beta=beta)
    if k > pool.n:
        raise PoolExhausted(f"k={k} exceeds pool size {pool.n}")
    cache = build_image_cache(test_image, pool, k)
    try:
        labels = make_labels(cache, attr_text, alpha=1.0)
    except DegenerateStatistics:
        # tiny per-instance caches can have zero similarity variance;
        # standardization is undefined there, the row softmax still applies
        warnings.warn("per-instance cache statistics degenerate; using "
                      "softmax-only soft labels", ComcaWarning)
        labels = make_labels(cache, attr_text, variant="softmax_only",
                             alpha=1.0)
    prompts = attr_prompts or attr_text
    test = EmbeddingMatrix(ids=["_probe"],
                           data=np.asarray(test_image, dtype=np.float64)[None, :],
                           kind="image")
    cache_sm = comca_cache_scores(test, cache, labels, beta,
                                  eta_form=params.eta_form,
                                  eq10_form=params.eq10_form,
                                  attribute_names=list(prompts.ids))
    clip_sm = zero_shot_scores(test, prompts)
    fused = fuse_final(cache_sm, clip_sm, params.lam, params.norm_mode)
    return fused.values[0]


# --- serialization --------------------------------------------------------
#
# JSON header at <path>; float64 little-endian row-major block at
# <path>.bin.

def save_scores(scores: ScoreMatrix, path: str | Path):
    header = {
        "instances": scores.instance_ids,
        "attributes": scores.attribute_names,
        "kind": scores.kind,
    }
    Path(path).write_text(json.dumps(header, indent=1) + "\n", encoding="utf-8")
    blob = np.ascontiguousarray(scores.values, dtype="<f8").tobytes(order="C")
    Path(str(path) + ".bin").write_bytes(blob)


def load_scores(path: str | Path) -> ScoreMatrix:
    header = json.loads(Path(path).read_text(encoding="utf-8"))
    raw = Path(str(path) + ".bin").read_bytes()
    n = len(header["instances"])
    m = len(header["attributes"])
    values = np.frombuffer(raw, dtype="<f8").reshape(n, m).astype(np.float64)
    return ScoreMatrix(instance_ids=list(header["instances"]),
                       attribute_names=list(header["attributes"]),
                       values=values, kind=header["kind"])
