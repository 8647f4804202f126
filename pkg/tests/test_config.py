import json

import pytest

from comca.config import RunConfig
from comca.errors import ConfigError, DataError


class TestDefaults:
    def test_default_hyperparameters_serialize_exactly(self):
        cfg = RunConfig()
        raw = json.loads(cfg.to_json())
        assert raw["lambda"] == 1.17
        assert raw["beta"] == 1.0
        assert raw["alpha"] == 0.6
        assert raw["k"] == 16
        assert raw["norm_mode"] == "max_softmax"
        assert raw["eta_c"] == "tip"
        assert raw["eq10_form"] == "outside"
        assert raw["strategy"] == "comca"
        assert raw["soft_variant"] == "standardized_softmax"

    def test_json_is_deterministic(self):
        assert RunConfig().to_json() == RunConfig().to_json()

    def test_config_hash_changes_with_fields(self):
        a = RunConfig()
        b = RunConfig()
        b.apply({"k": 8})
        assert a.config_hash() != b.config_hash()


class TestPrecedence:
    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"lambda": 0.5, "seed": 9}))
        cfg = RunConfig.from_file(path)
        assert cfg.params.lam == 0.5
        assert cfg.seed == 9
        assert cfg.params.beta == 1.0  # untouched default

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"lambda": 0.5, "k": 4}))
        cfg = RunConfig.from_file(path)
        cfg.apply({"lambda": 2.0})
        assert cfg.params.lam == 2.0
        assert cfg.params.k == 4

    def test_none_overrides_ignored(self):
        cfg = RunConfig()
        cfg.apply({"lambda": None, "seed": None})
        assert cfg.params.lam == 1.17

    def test_llm_subconfig_merged(self):
        cfg = RunConfig()
        cfg.apply({"llm": {"endpoint": "http://x", "batch_size": 10,
                           "model": None}})
        assert cfg.llm.endpoint == "http://x"
        assert cfg.llm.batch_size == 10
        assert cfg.llm.model == "gpt-3.5-turbo"


class TestValidation:
    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig().apply({"bogus": 1})

    def test_invalid_hyper_value_is_config_error(self):
        with pytest.raises(ConfigError):
            RunConfig().apply({"alpha": 2.0})

    def test_missing_config_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            RunConfig.from_file(tmp_path / "nope.json")

    def test_bad_json_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)

    def test_require_paths(self, tmp_path):
        cfg = RunConfig()
        with pytest.raises(ConfigError):
            cfg.require_paths("vocab")
        cfg.vocab = str(tmp_path / "missing.json")
        with pytest.raises(DataError):
            cfg.require_paths("vocab")
        (tmp_path / "there.json").write_text("{}")
        cfg.vocab = str(tmp_path / "there.json")
        cfg.require_paths("vocab")


def test_round_trip_through_dict():
    cfg = RunConfig()
    cfg.apply({"lambda": 0.9, "strategy": "random", "seed": 3})
    back = RunConfig.from_dict(cfg.to_dict())
    assert back.to_json() == cfg.to_json()
    assert back.config_hash() == cfg.config_hash()
