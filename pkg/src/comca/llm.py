"""Chat-completions scoring of attribute-object pairs.

Objects are scored per attribute in batches; every (attribute, object,
model, prompt-hash) score is persisted to a JSON-lines cache so reruns
replay without network access. Chunk boundaries never affect results
because each pair is scored independently.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .embeddings import Vocabulary
from .errors import ComcaWarning, EmptyVocabulary, LlmParse, LlmTransport, MissingScore
from .prompts import LLM_COMPAT_PROMPT

API_KEY_ENV = "COMCA_LLM_API_KEY"


@dataclass
class LlmConfig:
    endpoint: str = ""
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    batch_size: int = 100
    retries: int = 3
    timeout: float = 60.0
    retry_backoff: float = 0.5
    fallback_score: float = 5.0
    use_fallback: bool = True
    prompt_template: str = LLM_COMPAT_PROMPT


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpLlmClient:
    """Minimal chat-completions client over HTTP POST."""

    def __init__(self, cfg: LlmConfig):
        if not cfg.endpoint:
            raise LlmTransport("no LLM endpoint configured")
        self.cfg = cfg
        self.api_key = os.environ.get(API_KEY_ENV, "")

    def complete(self, prompt: str) -> str:
        import requests

        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.cfg.retries):
            try:
                resp = requests.post(self.cfg.endpoint, json=body,
                                     headers=headers, timeout=self.cfg.timeout)
                if resp.status_code >= 500:
                    raise LlmTransport(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise LlmTransport(
                        f"request failed with status {resp.status_code}: "
                        f"{resp.text[:200]}")
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except LlmTransport as exc:
                last_error = exc
            except Exception as exc:  # connection errors, bad JSON
                last_error = LlmTransport(str(exc))
            if attempt + 1 < self.cfg.retries and self.cfg.retry_backoff > 0:
                time.sleep(self.cfg.retry_backoff * (attempt + 1))
        raise LlmTransport(
            f"giving up after {self.cfg.retries} attempts: {last_error}")


def prompt_hash(template: str) -> str:
    return hashlib.sha256(template.encode("utf-8")).hexdigest()[:16]


class ScoreCache:
    """Append-only JSONL score store; last write wins on identical keys."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._scores: dict[tuple[str, str, str, str], float] = {}
        if self.path and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    key = (rec["attribute"], rec["object"],
                           rec["model"], rec["prompt_hash"])
                    self._scores[key] = float(rec["score"])

    def get(self, attribute: str, obj: str, model: str, phash: str) -> float | None:
        return self._scores.get((attribute, obj, model, phash))

    def put(self, attribute: str, obj: str, model: str, phash: str, score: float):
        self._scores[(attribute, obj, model, phash)] = score
        if self.path:
            rec = {"attribute": attribute, "object": obj, "model": model,
                   "prompt_hash": phash, "score": score}
            with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


_LINE_RE = re.compile(r"^\s*(?:(\d+)\s*[.):]\s*)?(.*?)\s*:\s*(-?\d+(?:\.\d+)?)\s*$")


def parse_score_lines(text: str, requested: list[str]) -> dict[str, float]:
    """Extract ``category: score`` lines, matched by name then by index."""
    lower_requested = {name.lower(): name for name in requested}
    found: dict[str, float] = {}
    for line in text.splitlines():
        m = _LINE_RE.match(line)
        if not m:
            continue
        idx_str, category, score_str = m.groups()
        score = float(score_str)
        name = lower_requested.get(category.strip().lower())
        if name is None and idx_str is not None:
            idx = int(idx_str) - 1
            if 0 <= idx < len(requested):
                name = requested[idx]
        if name is not None and name not in found:
            found[name] = score
    return found


def build_compat_prompt(template: str, attribute: str, objects: list[str]) -> str:
    categories = "\n".join(f"{i + 1}. {o}" for i, o in enumerate(objects))
    return template.format(count_categories=len(objects),
                           categories=categories, attribute=attribute)


def _clamp_score(attribute: str, obj: str, score: float) -> float:
    if score < 0.0 or score > 10.0:
        warnings.warn(
            f"score {score} for ({attribute!r}, {obj!r}) outside [0, 10]; "
            "clamping", ComcaWarning)
        return float(np.clip(score, 0.0, 10.0))
    return score


def llm_score_pairs(
    vocab: Vocabulary,
    client: LlmClient | None,
    cfg: LlmConfig | None = None,
    cache: ScoreCache | None = None,
) -> np.ndarray:
    """Score every attribute-object pair on the 0..10 compatibility scale.

    Cached pairs never hit the network; with a complete cache the client
    may be None.
    """
    cfg = cfg or LlmConfig()
    cache = cache or ScoreCache(None)
    if not vocab.attributes or not vocab.objects:
        raise EmptyVocabulary("vocabulary has no attributes or objects")
    phash = prompt_hash(cfg.prompt_template)
    n, m = len(vocab.attributes), len(vocab.objects)
    phi_llm = np.full((n, m), np.nan)

    for i, attr in enumerate(vocab.attributes):
        for start in range(0, m, cfg.batch_size):
            chunk = vocab.objects[start:start + cfg.batch_size]
            missing = []
            for j, obj in enumerate(chunk):
                hit = cache.get(attr.name, obj, cfg.model, phash)
                if hit is None:
                    missing.append(obj)
                else:
                    phi_llm[i, start + j] = hit
            if not missing:
                continue
            if client is None:
                raise MissingScore(
                    f"no client and cache lacks {len(missing)} scores for "
                    f"attribute {attr.name!r}")
            scores = _query_chunk(client, cfg, attr.name, missing)
            for obj, score in scores.items():
                score = _clamp_score(attr.name, obj, score)
                cache.put(attr.name, obj, cfg.model, phash, score)
                phi_llm[i, start + chunk.index(obj)] = score

    holes = np.argwhere(np.isnan(phi_llm))
    for i, j in holes:
        attr, obj = vocab.attributes[i].name, vocab.objects[j]
        if not cfg.use_fallback:
            raise MissingScore(f"no score for ({attr!r}, {obj!r})")
        warnings.warn(
            f"no score for ({attr!r}, {obj!r}); substituting fallback "
            f"{cfg.fallback_score}", ComcaWarning)
        phi_llm[i, j] = cfg.fallback_score
    return phi_llm


def _query_chunk(client: LlmClient, cfg: LlmConfig, attribute: str,
                 objects: list[str]) -> dict[str, float]:
    """One scoring request plus a single repair re-query for missing lines."""
    prompt = build_compat_prompt(cfg.prompt_template, attribute, objects)
    text = client.complete(prompt)
    found = parse_score_lines(text, objects)
    missing = [o for o in objects if o not in found]
    if missing:
        repair_prompt = build_compat_prompt(cfg.prompt_template, attribute, missing)
        repair_text = client.complete(repair_prompt)
        repaired = parse_score_lines(repair_text, missing)
        found.update(repaired)
        still = [o for o in missing if o not in repaired]
        if still and not cfg.use_fallback:
            raise LlmParse(
                f"unparseable scores for {still} under attribute {attribute!r}")
    return found
