#!/usr/bin/env python3
"""Generate the committed end-to-end fixture and its golden mAP.

The fixture is a synthetic 6-image pool, 4 test instances, 3 attributes,
2 objects. The golden numbers are produced by composing the scalar-loop
oracle implementations (tests/oracles.py) end to end, never the package
code, and are frozen into golden.json. All embedding values are
quantized to float32 before the oracle runs, because that is what the
interchange containers store.

Run from the repository root:  python scripts/gen_golden_fixture.py
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import (  # noqa: E402
    average_precision_loop,
    comca_scores_loop,
    cosine_loop,
    fuse_loop,
    similarity_loop,
    softmax_loop,
)

OUT = ROOT / "tests" / "fixtures" / "golden"

DATA_SEED = 20240617          # seeds the synthetic embedding draw
SAMPLING_SEED = 12345         # pipeline cache-sampling seed (config.json)
NOISE = 0.9                   # keeps the golden mAP away from the trivial 1.0
D = 8
K = 2
ATTRS = ["red", "round", "fuzzy"]
BUCKETS = ["head", "medium", "tail"]
OBJS = ["ball", "cat"]

PHI_DB = [[3, 1], [2, 2], [1, 3]]
PHI_LLM = [[8.0, 2.0], [5.0, 5.0], [3.0, 7.0]]

MAGIC = b"COMCAEMB"
HEADER = struct.Struct("<8sLLLL")


def unit(v):
    return v / np.linalg.norm(v)


def q32(arr):
    """Quantize to the float32 interchange grid, back to float64."""
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


def write_container(path, data, ids, kind_code):
    data32 = np.ascontiguousarray(data, dtype="<f4")
    n, d = data32.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, 1, kind_code, n, d))
        fh.write(data32.tobytes(order="C"))
    with open(str(path) + ".ids.jsonl", "w", encoding="utf-8",
              newline="\n") as fh:
        for row, id_ in enumerate(ids):
            fh.write(json.dumps({"row": row, "id": id_}) + "\n")


def sample_indices(probs, k, seed, attr_index):
    """Inverse-CDF draws from the pinned counter-based generator."""
    gen = np.random.Generator(np.random.Philox(key=seed ^ attr_index))
    cum = []
    total = 0.0
    for p in probs:
        total += p
        cum.append(total)
    out = []
    for u in gen.random(k):
        idx = 0
        while idx < len(cum) - 1 and u >= cum[idx]:
            idx += 1
        out.append(idx)
    return out


def retrieve(query, pool_vecs, pool_ids, exclude):
    best_score, best_id = None, None
    for vec, pid in zip(pool_vecs, pool_ids):
        if pid in exclude:
            continue
        s = cosine_loop(query, vec)
        if best_score is None or s > best_score or \
                (s == best_score and pid < best_id):
            best_score, best_id = s, pid
    if best_id is None:
        raise SystemExit("pool exhausted")
    return best_id


def oracle_pipeline(pool_vecs, pool_ids, queries, images, prompts, attr_text,
                    phi, lam, alpha, beta, seed):
    n_attrs, n_objs = len(ATTRS), len(OBJS)
    # cache construction
    entries = []  # (pool row index, source attribute)
    for a in range(n_attrs):
        row = phi[a]
        total = sum(row)
        probs = [v / total for v in row]
        used = set()
        for o in sample_indices(probs, K, seed, a):
            qvec = queries[(ATTRS[a], OBJS[o])]
            pid = retrieve(qvec, pool_vecs, pool_ids, used)
            used.add(pid)
            entries.append((pool_ids.index(pid), a))
    cache_vecs = [pool_vecs[i] for i, _ in entries]
    # soft labels, standardized softmax, alpha blend
    raw = similarity_loop(cache_vecs, attr_text)
    flat = [v for row in raw for v in row]
    mu = sum(flat) / len(flat)
    sigma = (sum((v - mu) ** 2 for v in flat) / len(flat)) ** 0.5
    soft = [softmax_loop([(v - mu) / sigma for v in row]) for row in raw]
    labels = []
    for (_, a), srow in zip(entries, soft):
        labels.append([(1.0 - alpha) * (1.0 if j == a else 0.0)
                       + alpha * srow[j] for j in range(n_attrs)])
    # scoring
    cache_scores = comca_scores_loop(images, cache_vecs, labels, beta)
    clip_scores = similarity_loop(images, prompts)
    fused = fuse_loop(cache_scores, clip_scores, lam)
    return fused, clip_scores


def eval_map(score_rows, label_rows, ids, buckets):
    aps, per_bucket = [], {}
    for a in range(len(label_rows[0])):
        labels = [row[a] for row in label_rows]
        scores = [row[a] for row in score_rows]
        if 1 not in [l for l in labels if l != 0]:
            continue
        ap = average_precision_loop(scores, labels, ids)
        aps.append(ap)
        per_bucket.setdefault(buckets[a], []).append(ap)
    return (float(np.mean(aps)),
            {b: float(np.mean(v)) for b, v in per_bucket.items()})


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(DATA_SEED)
    attr_dirs = [unit(rng.normal(size=D)) for _ in ATTRS]
    obj_dirs = [unit(rng.normal(size=D)) for _ in OBJS]

    pool_plan = [(a, o) for a in range(3) for o in range(2)]
    pool = q32([unit(attr_dirs[a] + obj_dirs[o] + NOISE * rng.normal(size=D))
                for a, o in pool_plan])
    pool_ids = [f"pool{i:02d}" for i in range(len(pool_plan))]

    inst_plan = [([0], 0, [1, -1, -1]),
                 ([1], 1, [-1, 1, -1]),
                 ([2], 0, [-1, -1, 1]),
                 ([0], 1, [1, -1, 0])]
    images = q32([unit(sum(attr_dirs[a] for a in gt) + obj_dirs[o]
                       + NOISE * rng.normal(size=D))
                  for gt, o, _ in inst_plan])
    image_ids = [f"inst{i}" for i in range(len(inst_plan))]
    label_rows = [labels for _, _, labels in inst_plan]

    prompts = q32([unit(v + (NOISE / 2) * rng.normal(size=D)) for v in attr_dirs])
    attr_text = q32([unit(v + (NOISE / 2) * rng.normal(size=D)) for v in attr_dirs])
    query_ids = [f"{a}|{o}" for a in ATTRS for o in OBJS]
    queries = q32([unit(attr_dirs[i] + obj_dirs[j] + (NOISE / 2) * rng.normal(size=D))
                   for i in range(3) for j in range(2)])

    write_container(OUT / "pool.comcaemb", pool, pool_ids, 0)
    write_container(OUT / "images.comcaemb", images, image_ids, 0)
    write_container(OUT / "prompts.comcaemb", prompts, ATTRS, 1)
    write_container(OUT / "attr_text.comcaemb", attr_text, ATTRS, 1)
    write_container(OUT / "queries.comcaemb", queries, query_ids, 1)

    (OUT / "vocab.json").write_text(json.dumps({
        "attributes": [{"name": a, "type": "is", "synonyms": [],
                        "bucket": b} for a, b in zip(ATTRS, BUCKETS)],
        "objects": OBJS,
    }, indent=1) + "\n")

    phi = [[PHI_DB[i][j] * PHI_LLM[i][j] for j in range(2)] for i in range(3)]
    (OUT / "compat.json").write_text(json.dumps({
        "attributes": ATTRS, "objects": OBJS, "phi_db": PHI_DB,
        "phi_llm": PHI_LLM, "phi": phi, "combine_mode": "multiply",
    }, indent=1) + "\n")

    (OUT / "annotations.json").write_text(json.dumps({
        "attributes": [{"name": a, "type": "is", "bucket": b}
                       for a, b in zip(ATTRS, BUCKETS)],
        "instances": [{"id": id_, "labels": labels}
                      for id_, labels in zip(image_ids, label_rows)],
    }, indent=1) + "\n")

    (OUT / "config.json").write_text(json.dumps({
        "vocab": "vocab.json", "compat": "compat.json",
        "pool": "pool.comcaemb", "queries": "queries.comcaemb",
        "prompts": "prompts.comcaemb", "attr_text": "attr_text.comcaemb",
        "images": "images.comcaemb", "annotations": "annotations.json",
        "k": K, "seed": SAMPLING_SEED,
    }, indent=1) + "\n")

    # golden numbers via the composed oracle, on the quantized values
    qmap = {(a, o): q for (a, o), q in
            zip([(a, o) for a in ATTRS for o in OBJS], queries.tolist())}
    fused, clip = oracle_pipeline(
        pool.tolist(), pool_ids, qmap, images.tolist(), prompts.tolist(),
        attr_text.tolist(), phi, lam=1.17, alpha=0.6, beta=1.0,
        seed=SAMPLING_SEED)
    golden_map, golden_buckets = eval_map(fused, label_rows, image_ids,
                                          BUCKETS)
    zs_map, _ = eval_map(clip, label_rows, image_ids, BUCKETS)

    fused_l0, _ = oracle_pipeline(
        pool.tolist(), pool_ids, qmap, images.tolist(), prompts.tolist(),
        attr_text.tolist(), phi, lam=0.0, alpha=0.6, beta=1.0,
        seed=SAMPLING_SEED)
    l0_map, _ = eval_map(fused_l0, label_rows, image_ids, BUCKETS)
    if l0_map != zs_map:
        raise SystemExit(f"fixture violates the lam=0 equality: "
                         f"{l0_map} vs {zs_map}; pick another DATA_SEED")

    (OUT / "golden.json").write_text(json.dumps({
        "map": golden_map,
        "per_bucket": golden_buckets,
        "zero_shot_map": zs_map,
    }, indent=1) + "\n")
    print(f"golden mAP: {golden_map!r}")
    print(f"zero-shot mAP: {zs_map!r}")
    print(f"buckets: {golden_buckets}")


if __name__ == "__main__":
    main()
