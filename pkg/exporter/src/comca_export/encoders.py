"""Pluggable encoders resolved from a model id.

  hash/<dim>      deterministic content-hash encoder (tests, smoke runs)
  clip/<hf-id>    CLIP-style checkpoint via transformers (requires the
                  optional [clip] extra and locally available weights)
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image


class ModelLoad(Exception):
    pass


class ImageDecode(Exception):
    pass


def _unit_rows(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    return data / norms


class HashEncoder:
    """Maps content bytes to a seeded Gaussian direction.

    Identical content gives identical rows on every platform; there is no
    semantic structure. Intended for pipeline plumbing tests.
    """

    def __init__(self, dim: int):
        if dim < 2:
            raise ModelLoad(f"hash encoder dim must be >= 2, got {dim}")
        self.dim = dim

    def _embed_bytes(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.Generator(np.random.Philox(key=seed))
        return rng.normal(size=self.dim)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = [self._embed_bytes(b"text:" + t.encode("utf-8"))
                for t in texts]
        return _unit_rows(np.stack(rows))

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = []
        for img in images:
            rgb = img.convert("RGB")
            payload = (b"image:" + rgb.size[0].to_bytes(4, "little")
                       + rgb.size[1].to_bytes(4, "little") + rgb.tobytes())
            rows.append(self._embed_bytes(payload))
        return _unit_rows(np.stack(rows))


class ClipEncoder:
    """transformers-backed CLIP checkpoint; deterministic eval inference."""

    def __init__(self, model_id: str, device: str = "cpu",
                 batch_size: int = 32):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoad(f"clip backend needs the [clip] extra: {exc}")
        try:
            self.model = CLIPModel.from_pretrained(model_id).to(device)
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelLoad(f"cannot load {model_id!r}: {exc}")
        self.model.eval()
        self.device = device
        self.batch_size = batch_size
        self._torch = torch

    def _batched(self, items, fn):
        outs = []
        for start in range(0, len(items), self.batch_size):
            outs.append(fn(items[start:start + self.batch_size]))
        return np.concatenate(outs, axis=0)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        torch = self._torch

        def run(batch):
            inputs = self.processor(text=batch, return_tensors="pt",
                                    padding=True, truncation=True)
            inputs = {k: v.to(self.device) for k, v in inputs.items()}
            with torch.no_grad():
                feats = self.model.get_text_features(**inputs)
            return feats.cpu().double().numpy()

        return _unit_rows(self._batched(texts, run))

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch

        def run(batch):
            inputs = self.processor(images=[im.convert("RGB") for im in batch],
                                    return_tensors="pt")
            inputs = {k: v.to(self.device) for k, v in inputs.items()}
            with torch.no_grad():
                feats = self.model.get_image_features(**inputs)
            return feats.cpu().double().numpy()

        return _unit_rows(self._batched(images, run))


def resolve_encoder(model_id: str, device: str = "cpu", batch_size: int = 32):
    """Instantiate the encoder backend named by the model id."""
    scheme, _, rest = model_id.partition("/")
    if scheme == "hash":
        try:
            return HashEncoder(int(rest))
        except ValueError:
            raise ModelLoad(f"bad hash encoder spec {model_id!r}")
    if scheme == "clip":
        if not rest:
            raise ModelLoad("clip model id missing, use clip/<checkpoint>")
        return ClipEncoder(rest, device=device, batch_size=batch_size)
    raise ModelLoad(f"unknown model scheme {model_id!r} "
                    "(expected hash/<dim> or clip/<checkpoint>)")
