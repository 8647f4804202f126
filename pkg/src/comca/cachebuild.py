"""Cache population: object sampling, query lookup, pool retrieval.

Sampling uses the counter-based Philox generator (numpy's philox4x64)
with a per-attribute substream keyed by ``seed XOR attribute_index`` and
inverse-CDF categorical draws, so construction is reproducible bit-for-bit
and independent of attribute processing order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .compat import AttributeDistribution, CompatibilityTable
from .embeddings import AttributeEntry, EmbeddingMatrix, Vocabulary
from .errors import (
    MissingQueryEmbedding,
    PoolExhausted,
    UnknownPlaceholder,
)
from .prompts import RETRIEVAL_TEMPLATE

RNG_ALGORITHM = "philox4x64-xor-substream"

STRATEGIES = ("comca", "random", "brute_force", "image_based")

QUERY_ID_SEPARATOR = "|"


def query_id(attribute: str, obj: str) -> str:
    return f"{attribute}{QUERY_ID_SEPARATOR}{obj}"


def attribute_rng(seed: int, attr_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed ^ attr_index))


def sample_objects(dist: AttributeDistribution, k: int, rng_seed: int,
                   attr_index: int = 0) -> list[int]:
    """Draw k object indices from the distribution (repeats allowed)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = attribute_rng(rng_seed, attr_index)
    cum = np.cumsum(dist.probs)
    u = rng.random(k)
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(dist.probs) - 1).tolist()


def build_query(attribute: AttributeEntry | str, obj: str,
                template: str = RETRIEVAL_TEMPLATE) -> str:
    """Instantiate the retrieval template for an (attribute, object) pair."""
    name = attribute.name if isinstance(attribute, AttributeEntry) else attribute
    try:
        return template.format(noun=obj, attribute=name)
    except (KeyError, IndexError) as exc:
        raise UnknownPlaceholder(f"template {template!r}: {exc}") from exc


def retrieve_for_query(query_embedding: np.ndarray, pool: EmbeddingMatrix,
                       exclude: set[str] | frozenset[str] = frozenset()) -> str:
    """Pool id with maximal cosine to the query among non-excluded ids.

    Ties break toward the lexicographically smallest id.
    """
    scores = pool.data @ np.asarray(query_embedding, dtype=np.float64)
    valid = [i for i, id_ in enumerate(pool.ids) if id_ not in exclude]
    if not valid:
        raise PoolExhausted("every pool image is excluded")
    best = max(scores[i] for i in valid)
    return min(pool.ids[i] for i in valid if scores[i] == best)


@dataclass
class CacheEntry:
    image_id: str
    embedding: np.ndarray
    source_attribute: int  # -1 when hard labels are absent (image_based)
    sampled_object: int    # -1 when not bound to an object
    query_text: str = ""


@dataclass
class Cache:
    entries: list[CacheEntry]
    shots_per_attribute: int
    seed: int
    n_attributes: int
    strategy: str = "comca"
    rng_algorithm: str = RNG_ALGORITHM
    _emb: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.has_hard_labels:
            per_attr: dict[int, list[str]] = {}
            for e in self.entries:
                per_attr.setdefault(e.source_attribute, []).append(e.image_id)
            for a, ids in per_attr.items():
                if len(set(ids)) != len(ids):
                    raise ValueError(f"duplicate image ids for attribute {a}")
            if self.strategy in ("comca", "random"):
                expected = {a: self.shots_per_attribute
                            for a in range(self.n_attributes)}
                actual = {a: len(ids) for a, ids in per_attr.items()}
                if actual != expected:
                    raise ValueError(
                        f"per-attribute entry counts {actual} != {expected}")

    @property
    def has_hard_labels(self) -> bool:
        return self.strategy != "image_based"

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def embedding_matrix(self) -> np.ndarray:
        if self._emb is None:
            self._emb = np.stack([e.embedding for e in self.entries])
        return self._emb

    @property
    def attribute_indices(self) -> np.ndarray:
        return np.array([e.source_attribute for e in self.entries], dtype=np.int64)


def _retrieve_pairs(vocab: Vocabulary, pairs_per_attr: dict[int, list[int]],
                    queries: EmbeddingMatrix, pool: EmbeddingMatrix,
                    template: str) -> list[CacheEntry]:
    entries: list[CacheEntry] = []
    for a in sorted(pairs_per_attr):
        attr = vocab.attributes[a]
        used: set[str] = set()
        for o in pairs_per_attr[a]:
            obj = vocab.objects[o]
            qid = query_id(attr.name, obj)
            if qid not in queries:
                raise MissingQueryEmbedding(
                    f"no query embedding with id {qid!r}")
            image_id = retrieve_for_query(queries.row(qid), pool, used)
            used.add(image_id)
            entries.append(CacheEntry(
                image_id=image_id,
                embedding=pool.row(image_id).copy(),
                source_attribute=a,
                sampled_object=o,
                query_text=build_query(attr, obj, template),
            ))
    return entries


def build_cache(
    vocab: Vocabulary,
    compat: CompatibilityTable | None,
    query_embeddings: EmbeddingMatrix,
    pool: EmbeddingMatrix,
    k: int,
    seed: int,
    strategy: str = "comca",
    template: str = RETRIEVAL_TEMPLATE,
) -> Cache:
    """Assemble the hard-labeled cache for the requested strategy."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "image_based":
        raise ValueError(
            "image_based caches are built per test instance at inference "
            "time; use build_image_cache")
    n_attrs = len(vocab.attributes)
    n_objs = len(vocab.objects)
    pairs: dict[int, list[int]] = {}
    if strategy == "comca":
        if compat is None:
            raise ValueError("comca strategy requires a compatibility table")
        for a in range(n_attrs):
            pairs[a] = sample_objects(compat.distribution(a), k, seed, a)
    elif strategy == "random":
        uniform = np.full(n_objs, 1.0 / n_objs)
        for a in range(n_attrs):
            dist = AttributeDistribution(vocab.attributes[a].name, uniform)
            pairs[a] = sample_objects(dist, k, seed, a)
    else:  # brute_force: every pair, k shots each
        for a in range(n_attrs):
            pairs[a] = [o for o in range(n_objs) for _ in range(k)]
    entries = _retrieve_pairs(vocab, pairs, query_embeddings, pool, template)
    return Cache(entries=entries, shots_per_attribute=k, seed=seed,
                 n_attributes=n_attrs, strategy=strategy)


def build_image_cache(test_embedding: np.ndarray, pool: EmbeddingMatrix,
                      k: int) -> Cache:
    """Per-instance cache of the k pool images nearest the test image."""
    if k > pool.n:
        raise PoolExhausted(f"k={k} exceeds pool size {pool.n}")
    used: set[str] = set()
    entries = []
    for _ in range(k):
        image_id = retrieve_for_query(test_embedding, pool, used)
        used.add(image_id)
        entries.append(CacheEntry(
            image_id=image_id,
            embedding=pool.row(image_id).copy(),
            source_attribute=-1,
            sampled_object=-1,
        ))
    return Cache(entries=entries, shots_per_attribute=k, seed=0,
                 n_attributes=0, strategy="image_based")


def save_cache(cache: Cache, path: str | Path, vocab: Vocabulary | None = None):
    """Write the cache manifest; embeddings stay referenced by image id."""
    def attr_name(a: int) -> str | None:
        if a < 0:
            return None
        return vocab.attributes[a].name if vocab else str(a)

    def obj_name(o: int) -> str | None:
        if o < 0:
            return None
        return vocab.objects[o] if vocab else str(o)

    payload = {
        "k": cache.shots_per_attribute,
        "seed": cache.seed,
        "strategy": cache.strategy,
        "rng_algorithm": cache.rng_algorithm,
        "entries": [
            {"image_id": e.image_id,
             "attribute": attr_name(e.source_attribute),
             "object": obj_name(e.sampled_object),
             "query": e.query_text}
            for e in cache.entries
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_cache(path: str | Path, vocab: Vocabulary, pool: EmbeddingMatrix) -> Cache:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    attr_idx = {a.name: i for i, a in enumerate(vocab.attributes)}
    obj_idx = {o: j for j, o in enumerate(vocab.objects)}
    entries = []
    for rec in raw["entries"]:
        entries.append(CacheEntry(
            image_id=rec["image_id"],
            embedding=pool.row(rec["image_id"]).copy(),
            source_attribute=attr_idx[rec["attribute"]] if rec["attribute"] else -1,
            sampled_object=obj_idx[rec["object"]] if rec["object"] else -1,
            query_text=rec.get("query") or "",
        ))
    return Cache(entries=entries, shots_per_attribute=raw["k"],
                 seed=raw["seed"], n_attributes=len(vocab.attributes),
                 strategy=raw["strategy"],
                 rng_algorithm=raw.get("rng_algorithm", RNG_ALGORITHM))
