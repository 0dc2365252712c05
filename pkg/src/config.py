"""
Configuration management for xbranch.

Run configurations are JSON documents (files ending in .yaml or .yml are read
as YAML) with the sections below. Keys not present in DEFAULT_CONFIG
are rejected; missing keys keep their defaults.
"""

import copy
import json
import os
from typing import Any, Dict, Iterable, Optional

import yaml

from .errors import ConfigError


class Config:
    """Configuration manager for xbranch runs."""

    DEFAULT_CONFIG = {
        "model": {
            "task": "classify",
            "n_input": 512,
            "d0": 16,
            "d_ratio": 2,
            "k": 16,
            "stages": 4,
            "heads": 4,
            "L": 2,
            "fusion": "part_tokens",
            "num_classes": 3,
            "sigma_scope": "sample",
            "msa_baseline": False,
            "msa_out_proj": True,
            "msa_head_dim": None,
            "msa_full_heads": False,
            "aux_branch_loss": False,
            "num_categories": 16,
            "num_parts": 50,
            "label_embed_dim": 64,
            "seg_hidden": 64,
            "eps": 1e-5,
            "seed": 42
        },
        "train": {
            "epochs": 50,
            "lr": 1e-3,
            "batch": 16,
            "seed": 42,
            "jobs": 1,
            "augment": {
                "enabled": True,
                "scale_low": 0.8,
                "scale_high": 1.2,
                "shift": 0.2,
                "dropout_prob": 0.5,
                "dropout_max": 0.875
            }
        },
        "data": {
            "source": "synthetic",
            "classes": ["sphere", "cube", "cylinder"],
            "per_class": 100,
            "n_points": 512,
            "fractions": [2 / 3, 1 / 3],
            "manifest": None,
            "seed": 42
        },
        "output": {
            "dir": "runs/latest"
        },
        "gradcheck": {
            "n_input": 32,
            "stages": 2,
            "d0": 8,
            "k": 8,
            "heads": 2,
            "L": 1,
            "num_classes": 3,
            "h": 1e-5,
            "tol": 1e-5,
            "coords_per_param": 32,
            "seed": 0
        },
        "ablate": {
            "epochs": 10
        },
        "bench": {
            "sizes": [64, 128, 256, 512],
            "ks": [8, 16],
            "repeats": 3
        },
        "logging": {
            "level": "INFO",
            "file": None,
            "max_file_size": 10485760,  # 10MB
            "backup_count": 5
        }
    }

    SEARCH_NAMES = ("xbranch.json", "xbranch.yaml", "xbranch.yml")

    def __init__(self, config_file: str = None, discover: bool = True):
        if config_file is None and discover:
            config_file = self._find_config_file()
        self.config_file = config_file
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        if self.config_file:
            self.load_config()

    def _find_config_file(self) -> Optional[str]:
        """Find configuration file in standard locations."""
        search_paths = [os.path.join(os.getcwd(), name) for name in self.SEARCH_NAMES]
        search_paths.append(os.path.join(os.path.expanduser("~"), ".xbranch", "config.yaml"))

        for path in search_paths:
            if os.path.isfile(path):
                return path
        return None

    def load_config(self):
        """Load configuration from file."""
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                # YAML 1.1 reads exponent floats without a dot ("1e-05") as strings
                if str(self.config_file).endswith('.json'):
                    user_config = json.load(f)
                else:
                    user_config = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config file {self.config_file}: {e}") from e
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"config file {self.config_file} is not valid JSON/YAML: {e}") from e
        if user_config is None:
            return
        if not isinstance(user_config, dict):
            raise ConfigError(f"config file {self.config_file} must hold a mapping at top level")
        self._merge_config(self.config, user_config)

    def _merge_config(self, base: Dict[str, Any], update: Dict[str, Any], path: str = ""):
        """Recursively merge configuration dictionaries, rejecting unknown keys."""
        for key, value in update.items():
            dotted = f"{path}{key}"
            if key not in base:
                raise ConfigError(f"unknown config key '{dotted}'")
            if isinstance(base[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"config key '{dotted}' must be a mapping")
                self._merge_config(base[key], value, dotted + ".")
            else:
                base[key] = self._checked(dotted, base[key], value)

    @staticmethod
    def _checked(key: str, default: Any, value: Any) -> Any:
        if default is None or value is None:
            return value
        if isinstance(default, bool):
            ok = isinstance(value, bool)
        elif isinstance(default, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(default, float):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        else:
            ok = isinstance(value, type(default))
        if not ok:
            raise ConfigError(
                f"config key '{key}' expects {type(default).__name__}, got {value!r}"
            )
        return value

    def save_config(self, file_path: str = None):
        """Save current configuration to file."""
        save_path = file_path or self.config_file or "xbranch.json"
        dir_path = os.path.dirname(save_path)
        if dir_path and not os.path.exists(dir_path):
            os.makedirs(dir_path, exist_ok=True)

        with open(save_path, 'w', encoding='utf-8') as f:
            if save_path.endswith(('.yaml', '.yml')):
                yaml.safe_dump(self.config, f, default_flow_style=False, indent=2)
            else:
                json.dump(self.config, f, indent=2, sort_keys=True)
                f.write("\n")
        return save_path

    def save_resolved(self, out_dir: str) -> str:
        """Echo the fully resolved configuration as resolved_config.json."""
        return self.save_config(os.path.join(out_dir, "resolved_config.json"))

    def resolved(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def get(self, key: str, default=None):
        """Get configuration value by dot-separated key."""
        keys = key.split('.')
        value = self.config

        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key: str, value: Any):
        """Set an existing configuration value by dot-separated key."""
        keys = key.split('.')
        config = self.config

        for depth, k in enumerate(keys[:-1]):
            if not isinstance(config.get(k), dict):
                raise ConfigError(f"unknown config key '{'.'.join(keys[:depth + 1])}'")
            config = config[k]

        if keys[-1] not in config:
            raise ConfigError(f"unknown config key '{key}'")
        if isinstance(config[keys[-1]], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{key}' must be a mapping")
            self._merge_config(config[keys[-1]], value, key + ".")
        else:
            config[keys[-1]] = self._checked(key, config[keys[-1]], value)

    def apply_overrides(self, overrides: Iterable[str]):
        """Apply `section.key=value` overrides; values are parsed as JSON, falling back to YAML scalars."""
        for item in overrides or ():
            if '=' not in item:
                raise ConfigError(f"override '{item}' is not of the form key=value")
            key, raw = item.split('=', 1)
            try:
                value = json.loads(raw)
            except ValueError:
                value = None if raw.strip() == "" else self._yaml_scalar(item, raw)
            self.set(key.strip(), value)

    @staticmethod
    def _yaml_scalar(item: str, raw: str):
        try:
            return yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigError(f"override '{item}' has an unparsable value") from e

    def model_config(self, section: str = "model"):
        from .model.network import ModelConfig

        return ModelConfig.from_dict(self.get(section))

    def gradcheck_model_config(self):
        from .model.network import ModelConfig

        fields = {k: v for k, v in self.get("gradcheck").items()
                  if k not in ("h", "tol", "coords_per_param", "seed")}
        return ModelConfig.from_dict(
            {**self.get("model"), **fields, "task": "classify", "msa_baseline": False}
        )

    def train_settings(self):
        from .model.training import TrainSettings

        return TrainSettings.from_dict(self.get("train"))

    def augment_config(self):
        from .data.augment import AugmentConfig

        return AugmentConfig.from_dict(self.get("train.augment"))

    def create_default_config(self, file_path: str = None):
        """Create a default configuration file."""
        return self.save_config(file_path or "xbranch.json")

    def __getitem__(self, key: str):
        return self.get(key)

    def __setitem__(self, key: str, value: Any):
        self.set(key, value)


# Global configuration instance
config = Config()
