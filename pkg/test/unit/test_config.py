"""
Unit tests for configuration management.
"""

import json

import pytest

from src.config import Config
from src.errors import ConfigError
from src.model import ModelConfig


@pytest.mark.unit
class TestConfig:
    """Test cases for Config class."""

    def test_default_config(self, default_config):
        """Defaults are present without any file."""
        assert default_config.get("model.heads") == 4
        assert default_config.get("model.L") == 2
        assert default_config.get("train.augment.dropout_max") == 0.875
        assert default_config.config_file is None

    def test_get_missing_key(self, default_config):
        """get returns the default for unknown dotted keys."""
        assert default_config.get("model.colour", "none") == "none"

    def test_load_json_file(self, tmp_path):
        """A JSON file overrides only the keys it names."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": {"k": 8}, "train": {"epochs": 3}}), encoding="utf-8")
        cfg = Config(str(path))
        assert cfg.get("model.k") == 8
        assert cfg.get("train.epochs") == 3
        assert cfg.get("model.d0") == 16

    def test_load_yaml_file(self, tmp_path):
        """YAML files are accepted too."""
        path = tmp_path / "run.yaml"
        path.write_text("model:\n  fusion: all_tokens\n", encoding="utf-8")
        assert Config(str(path)).get("model.fusion") == "all_tokens"

    def test_unknown_key_in_file(self, tmp_path):
        """Unknown keys name their dotted path."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"model": {"colour": "red"}}), encoding="utf-8")
        with pytest.raises(ConfigError, match="model.colour"):
            Config(str(path))

    def test_non_mapping_file(self, tmp_path):
        """The top level must be a mapping."""
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            Config(str(path))

    def test_unparsable_file(self, tmp_path):
        """Syntax errors become ConfigError."""
        path = tmp_path / "run.json"
        path.write_text("{model: [", encoding="utf-8")
        with pytest.raises(ConfigError):
            Config(str(path))

    def test_missing_file(self, tmp_path):
        """A named file that does not exist is an error."""
        with pytest.raises(ConfigError):
            Config(str(tmp_path / "absent.json"))

    def test_discovery(self, isolated_cwd):
        """xbranch.json in the working directory is picked up."""
        (isolated_cwd / "xbranch.json").write_text(json.dumps({"model": {"L": 3}}), encoding="utf-8")
        assert Config().get("model.L") == 3

    def test_type_checking(self, default_config):
        """Values must match the default's type; ints widen to floats."""
        with pytest.raises(ConfigError, match="model.k"):
            default_config.set("model.k", "16")
        with pytest.raises(ConfigError):
            default_config.set("model.msa_baseline", 1)
        default_config.set("train.lr", 1)
        assert default_config.get("train.lr") == 1.0
        assert isinstance(default_config.get("train.lr"), float)

    def test_nullable_keys(self, default_config):
        """Keys defaulting to None take any value."""
        default_config.set("model.msa_head_dim", 8)
        assert default_config.get("model.msa_head_dim") == 8

    def test_set_unknown(self, default_config):
        """set refuses keys that do not exist."""
        with pytest.raises(ConfigError):
            default_config.set("model.colour", 1)
        with pytest.raises(ConfigError):
            default_config.set("nothing.here", 1)

    def test_overrides(self, default_config):
        """key=value overrides are parsed as YAML scalars."""
        default_config.apply_overrides(["model.k=32", "model.fusion=all_features", "train.augment.enabled=false"])
        assert default_config.get("model.k") == 32
        assert default_config.get("model.fusion") == "all_features"
        assert default_config.get("train.augment.enabled") is False

    def test_exponent_floats(self, default_config, tmp_path):
        """Exponent notation survives both overrides and saved files."""
        default_config.apply_overrides(["train.lr=1e-4"])
        assert default_config.get("train.lr") == 1e-4
        path = default_config.save_config(str(tmp_path / "saved.json"))
        assert Config(path).get("model.eps") == 1e-5

    def test_override_needs_equals(self, default_config):
        """Overrides without '=' are rejected."""
        with pytest.raises(ConfigError, match="key=value"):
            default_config.apply_overrides(["model.k"])

    def test_mapping_set_merges(self, default_config):
        """Setting a section merges into it."""
        default_config.set("train.augment", {"shift": 0.1})
        assert default_config.get("train.augment.shift") == 0.1
        assert default_config.get("train.augment.scale_low") == 0.8

    def test_save_resolved(self, default_config, tmp_path):
        """The resolved configuration round-trips through JSON."""
        default_config.set("model.k", 8)
        path = default_config.save_resolved(str(tmp_path / "out"))
        with open(path, encoding="utf-8") as f:
            saved = json.load(f)
        assert path.endswith("resolved_config.json")
        assert saved["model"]["k"] == 8
        assert saved == default_config.resolved()

    def test_create_default_config(self, tmp_path):
        """create_default_config writes a loadable file."""
        path = Config(discover=False).create_default_config(str(tmp_path / "xbranch.json"))
        assert Config(path).resolved() == Config(discover=False).resolved()

    def test_model_config(self, default_config):
        """The model section builds a validated ModelConfig."""
        cfg = default_config.model_config()
        assert isinstance(cfg, ModelConfig)
        assert cfg.validate().c_small == 16 * 2 ** 4

    def test_gradcheck_model_config(self, default_config):
        """The gradient-check model is the small CA classifier."""
        cfg = default_config.gradcheck_model_config()
        assert (cfg.n_input, cfg.stages, cfg.d0, cfg.L) == (32, 2, 8, 1)
        assert cfg.task == "classify" and not cfg.msa_baseline

    def test_train_and_augment_settings(self, default_config):
        """Train and augmentation sections convert to their dataclasses."""
        assert default_config.train_settings().epochs == 50
        assert default_config.augment_config().dropout_prob == 0.5

    def test_item_access(self, default_config):
        """Item syntax mirrors get/set."""
        default_config["ablate.epochs"] = 2
        assert default_config["ablate.epochs"] == 2
