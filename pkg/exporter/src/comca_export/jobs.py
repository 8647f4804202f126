"""Export jobs: manifest in, embedding container out."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .container import KIND_IMAGE, KIND_TEXT, write_container
from .encoders import ImageDecode, resolve_encoder
from .templates import (
    INFERENCE_TEMPLATE,
    RETRIEVAL_TEMPLATE,
    soft_label_texts,
)

log = logging.getLogger("comca_export")

MODES = ("pool_images", "region_images", "query_texts", "attr_text",
         "attr_prompts")

QUERY_ID_SEPARATOR = "|"


@dataclass
class ExportJob:
    mode: str
    model_id: str
    input_path: str        # image/pair manifest or vocabulary JSON
    output_path: str
    pairs_path: str = ""   # optional query_texts restriction
    device: str = "cpu"
    batch_size: int = 32

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown export mode {self.mode!r}")


@dataclass
class ExportResult:
    rows: int
    skipped: list[str] = field(default_factory=list)


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def read_vocab(path: str | Path) -> tuple[list[dict], list[str]]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    attributes = [{"name": a["name"], "type": a.get("type", "is")}
                  for a in raw["attributes"]]
    objects = list(raw["objects"])
    for name in [a["name"] for a in attributes] + objects:
        if QUERY_ID_SEPARATOR in name:
            raise ValueError(
                f"vocabulary name {name!r} contains the reserved "
                f"{QUERY_ID_SEPARATOR!r} separator")
    return attributes, objects


def _load_image(record: dict, crop: bool) -> Image.Image:
    path = record["path"]
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise ImageDecode(f"{path}: {exc}")
    if crop:
        box = record.get("box")
        if box is None:
            raise ImageDecode(f"{path}: region export needs a box")
        x, y, w, h = box
        if w <= 0 or h <= 0:
            raise ImageDecode(f"{path}: empty box {box}")
        img = img.crop((x, y, x + w, y + h))
    return img


def _export_images(job: ExportJob, encoder) -> ExportResult:
    records = read_jsonl(job.input_path)
    crop = job.mode == "region_images"
    ids, images, skipped = [], [], []
    for rec in records:
        try:
            images.append(_load_image(rec, crop))
            ids.append(rec["id"])
        except ImageDecode as exc:
            log.warning("skipping %s: %s", rec.get("id", "?"), exc)
            skipped.append(rec.get("id", rec.get("path", "?")))
    if not ids:
        raise ImageDecode("no decodable images in the manifest")
    data = encoder.encode_images(images)
    write_container(job.output_path, data, ids, KIND_IMAGE)
    return ExportResult(rows=len(ids), skipped=skipped)


def _export_query_texts(job: ExportJob, encoder) -> ExportResult:
    attributes, objects = read_vocab(job.input_path)
    if job.pairs_path:
        pairs = [(p["attribute"], p["object"])
                 for p in read_jsonl(job.pairs_path)]
    else:
        pairs = [(a["name"], o) for a in attributes for o in objects]
    ids = [f"{a}{QUERY_ID_SEPARATOR}{o}" for a, o in pairs]
    texts = [RETRIEVAL_TEMPLATE.format(noun=o, attribute=a) for a, o in pairs]
    data = encoder.encode_texts(texts)
    write_container(job.output_path, data, ids, KIND_TEXT)
    return ExportResult(rows=len(ids))


def _export_attr_prompts(job: ExportJob, encoder) -> ExportResult:
    attributes, _ = read_vocab(job.input_path)
    ids = [a["name"] for a in attributes]
    texts = [INFERENCE_TEMPLATE.format(attribute=a["name"])
             for a in attributes]
    data = encoder.encode_texts(texts)
    write_container(job.output_path, data, ids, KIND_TEXT)
    return ExportResult(rows=len(ids))


def _export_attr_text(job: ExportJob, encoder) -> ExportResult:
    attributes, _ = read_vocab(job.input_path)
    ids = [a["name"] for a in attributes]
    texts: list[str] = []
    for a in attributes:
        texts.extend(soft_label_texts(a["name"], a["type"]))
    embedded = encoder.encode_texts(texts)
    # average each attribute's template pair, then re-normalize
    paired = embedded.reshape(len(attributes), 2, -1).mean(axis=1)
    data = paired / np.linalg.norm(paired, axis=1, keepdims=True)
    write_container(job.output_path, data, ids, KIND_TEXT)
    return ExportResult(rows=len(ids))


def export(job: ExportJob) -> ExportResult:
    """Run one export job; returns row count and any skipped image ids."""
    encoder = resolve_encoder(job.model_id, device=job.device,
                              batch_size=job.batch_size)
    if job.mode in ("pool_images", "region_images"):
        return _export_images(job, encoder)
    if job.mode == "query_texts":
        return _export_query_texts(job, encoder)
    if job.mode == "attr_prompts":
        return _export_attr_prompts(job, encoder)
    return _export_attr_text(job, encoder)
