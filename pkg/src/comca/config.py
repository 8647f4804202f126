"""Run configuration: file paths, hyperparameters, pipeline switches.

Resolution precedence: command-line flags override config-file fields,
which override built-in defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, DataError
from .llm import LlmConfig
from .scoring import HyperParams

_HYPER_KEYS = {"lambda": "lam", "beta": "beta", "alpha": "alpha", "k": "k",
               "norm_mode": "norm_mode", "eta_c": "eta_form",
               "eq10_form": "eq10_form"}

_PATH_KEYS = ("vocab", "corpus", "pool", "queries", "prompts", "attr_text",
              "images", "annotations", "compat", "cache")


@dataclass
class RunConfig:
    # input artifacts
    vocab: str = ""
    corpus: str = ""
    pool: str = ""
    queries: str = ""
    prompts: str = ""
    attr_text: str = ""
    images: str = ""
    annotations: str = ""
    compat: str = ""
    cache: str = ""
    # behavior
    params: HyperParams = field(default_factory=HyperParams)
    strategy: str = "comca"
    soft_variant: str = "standardized_softmax"
    combine_mode: str = "multiply"
    smoothing: str = "none"
    seed: int = 0
    threads: int = 0  # 0 = hardware count
    llm: LlmConfig = field(default_factory=LlmConfig)

    def to_dict(self) -> dict:
        out: dict = {}
        for key in _PATH_KEYS:
            out[key] = getattr(self, key)
        for json_key, attr in _HYPER_KEYS.items():
            out[json_key] = getattr(self.params, attr)
        out.update({
            "strategy": self.strategy,
            "soft_variant": self.soft_variant,
            "combine_mode": self.combine_mode,
            "smoothing": self.smoothing,
            "seed": self.seed,
            "threads": self.threads,
            "llm": {
                "endpoint": self.llm.endpoint,
                "model": self.llm.model,
                "temperature": self.llm.temperature,
                "batch_size": self.llm.batch_size,
                "retries": self.llm.retries,
            },
        })
        return out

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
        if path:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        cfg = cls()
        cfg.apply(raw)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        return cls.from_dict(raw)

    def apply(self, overrides: dict):
        """Merge non-None override values into this config."""
        known = ({f.name for f in fields(self)} | set(_HYPER_KEYS)
                 | {"llm"}) - {"params"}
        hyper = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}")
            if key in _HYPER_KEYS:
                hyper[_HYPER_KEYS[key]] = value
            elif key == "llm":
                for lk, lv in value.items():
                    if lv is None:
                        continue
                    if not hasattr(self.llm, lk):
                        raise ConfigError(f"unknown llm config field {lk!r}")
                    setattr(self.llm, lk, lv)
            else:
                setattr(self, key, value)
        if hyper:
            merged = {f.name: getattr(self.params, f.name)
                      for f in fields(HyperParams)}
            merged.update(hyper)
            try:
                self.params = HyperParams(**merged)
            except ValueError as exc:
                raise ConfigError(str(exc))

    def require_paths(self, *keys: str):
        """Check referenced inputs exist before the command starts."""
        for key in keys:
            value = getattr(self, key)
            if not value:
                raise ConfigError(f"no {key} path configured")
            if not Path(value).exists():
                raise DataError(f"{key} path does not exist: {value}")

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]
