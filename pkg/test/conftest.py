"""
Pytest configuration and shared fixtures for testing.
"""

import json
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path for imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.config import Config
from src.geometry import PointCloud
from src.model import ModelConfig


TINY_MODEL = {
    "n_input": 32,
    "d0": 8,
    "d_ratio": 2,
    "k": 8,
    "stages": 2,
    "heads": 2,
    "L": 1,
    "num_classes": 3,
}


@pytest.fixture
def tiny_cfg():
    """Desk-scale classifier config: N=32, two stages, one layer."""
    return ModelConfig(**TINY_MODEL)


@pytest.fixture
def make_cloud():
    """Factory for random clouds with distinct points."""
    def factory(n=32, seed=0, label=None):
        coords = np.random.default_rng(seed).normal(size=(n, 3))
        return PointCloud(coords, label=label)
    return factory


@pytest.fixture
def run_config(tmp_path):
    """Small JSON run configuration for command-level tests."""
    data = {
        "model": dict(TINY_MODEL),
        "train": {"epochs": 2, "batch": 4, "lr": 0.003, "seed": 7},
        "data": {"per_class": 6, "n_points": 32, "seed": 3},
        "ablate": {"epochs": 1},
        "logging": {"level": "WARNING"},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def isolated_cwd(tmp_path, monkeypatch):
    """Run in an empty directory so no xbranch.json is auto-discovered."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def default_config():
    return Config(discover=False)


# Custom markers
def pytest_configure(config):
    """Configure custom pytest markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "e2e: End-to-end tests")
    config.addinivalue_line("markers", "performance: Performance tests")
    config.addinivalue_line("markers", "slow: Long acceptance runs")
