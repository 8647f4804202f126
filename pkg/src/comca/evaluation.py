"""Average-precision evaluation with unknown-label masking and buckets."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AllAttributesSkipped,
    Misalignment,
    NoPositives,
)
from .scoring import ScoreMatrix

BUCKETS = ("head", "medium", "tail")

POSITIVE, NEGATIVE, UNKNOWN = 1, -1, 0


@dataclass
class AnnotatedAttribute:
    name: str
    prompt_type: str = "is"
    bucket: str = "unknown"


@dataclass
class AnnotationSet:
    """Test instances with per-attribute {+1, -1, 0} labels."""

    attributes: list[AnnotatedAttribute]
    instance_ids: list[str]
    labels: np.ndarray  # (n_instances, |A|) of {+1, -1, 0}

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(set(self.instance_ids)) != len(self.instance_ids):
            raise Misalignment("duplicate instance ids")
        expected = (len(self.instance_ids), len(self.attributes))
        if self.labels.shape != expected:
            raise Misalignment(f"labels {self.labels.shape} != {expected}")
        if not np.all(np.isin(self.labels, (POSITIVE, NEGATIVE, UNKNOWN))):
            raise Misalignment("labels must be +1, -1 or 0")
        for a in self.attributes:
            if a.bucket not in BUCKETS + ("unknown",):
                raise Misalignment(f"bad bucket {a.bucket!r} for {a.name!r}")

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @classmethod
    def from_json(cls, path: str | Path) -> "AnnotationSet":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        attrs = [AnnotatedAttribute(name=a["name"],
                                    prompt_type=a.get("type", "is"),
                                    bucket=a.get("bucket", "unknown"))
                 for a in raw["attributes"]]
        ids = [inst["id"] for inst in raw["instances"]]
        labels = np.array([inst["labels"] for inst in raw["instances"]],
                          dtype=np.int64).reshape(len(ids), len(attrs))
        return cls(attributes=attrs, instance_ids=ids, labels=labels)

    def to_json(self, path: str | Path):
        payload = {
            "attributes": [{"name": a.name, "type": a.prompt_type,
                            "bucket": a.bucket} for a in self.attributes],
            "instances": [{"id": id_, "labels": row.tolist()}
                          for id_, row in zip(self.instance_ids, self.labels)],
        }
        Path(path).write_text(json.dumps(payload, indent=1) + "\n",
                              encoding="utf-8")


def average_precision(scores: np.ndarray, labels: np.ndarray,
                      instance_ids: list[str] | None = None) -> float:
    """Prefix-precision AP over positives, unknowns masked out.

    Instances sort by score descending with ties broken by instance id
    ascending, so results are machine-independent.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise Misalignment(f"{scores.shape} vs {labels.shape}")
    ids = instance_ids or [str(i) for i in range(len(scores))]
    keep = labels != UNKNOWN
    kept = [(scores[i], ids[i], labels[i]) for i in range(len(scores)) if keep[i]]
    if not any(lab == POSITIVE for _, _, lab in kept):
        raise NoPositives("no positive labels after masking")
    kept.sort(key=lambda t: (-t[0], t[1]))
    hits = 0
    precisions = []
    for rank, (_, _, lab) in enumerate(kept, start=1):
        if lab == POSITIVE:
            hits += 1
            precisions.append(hits / rank)
    return float(sum(precisions) / len(precisions))


@dataclass
class EvalResult:
    map: float
    per_bucket: dict[str, float]
    per_attribute: list[dict]  # name, bucket, ap, num_pos, num_neg, num_unknown
    skipped_attributes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "per_bucket": self.per_bucket,
            "per_attribute": self.per_attribute,
            "skipped_attributes": self.skipped_attributes,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1) + "\n"
        if path:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_csv(self, path: str | Path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "bucket", "ap", "num_pos", "num_neg",
                             "num_unknown"])
            for rec in self.per_attribute:
                writer.writerow([rec["name"], rec["bucket"],
                                 "" if rec["ap"] is None else rec["ap"],
                                 rec["num_pos"], rec["num_neg"],
                                 rec["num_unknown"]])


def evaluate(scores: ScoreMatrix, ann: AnnotationSet) -> EvalResult:
    """Per-attribute AP, overall mAP, and head/medium/tail bucket mAPs."""
    if scores.attribute_names != ann.attribute_names:
        raise Misalignment("attribute order differs between scores and "
                           "annotations")
    row_of = {id_: i for i, id_ in enumerate(scores.instance_ids)}
    missing = [id_ for id_ in ann.instance_ids if id_ not in row_of]
    if missing:
        raise Misalignment(f"{len(missing)} annotated instances missing from "
                           f"scores, first: {missing[0]!r}")
    rows = [row_of[id_] for id_ in ann.instance_ids]
    values = scores.values[rows]

    per_attribute: list[dict] = []
    skipped: list[str] = []
    aps: list[float] = []
    bucket_aps: dict[str, list[float]] = {b: [] for b in BUCKETS}
    for a, attr in enumerate(ann.attributes):
        col_labels = ann.labels[:, a]
        rec = {
            "name": attr.name,
            "bucket": attr.bucket,
            "ap": None,
            "num_pos": int(np.sum(col_labels == POSITIVE)),
            "num_neg": int(np.sum(col_labels == NEGATIVE)),
            "num_unknown": int(np.sum(col_labels == UNKNOWN)),
        }
        try:
            ap = average_precision(values[:, a], col_labels, ann.instance_ids)
        except NoPositives:
            skipped.append(attr.name)
            per_attribute.append(rec)
            continue
        rec["ap"] = ap
        per_attribute.append(rec)
        aps.append(ap)
        if attr.bucket in bucket_aps:
            bucket_aps[attr.bucket].append(ap)
    if not aps:
        raise AllAttributesSkipped("every attribute lacks positive labels")
    per_bucket = {b: float(np.mean(v)) for b, v in bucket_aps.items() if v}
    return EvalResult(map=float(np.mean(aps)), per_bucket=per_bucket,
                      per_attribute=per_attribute, skipped_attributes=skipped)
