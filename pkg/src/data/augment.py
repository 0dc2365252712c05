"""
Training-time augmentation: anisotropic scaling, translation and input dropout.
"""

import math
from dataclasses import dataclass, fields
from typing import Dict

import numpy as np

from ..errors import ConfigError
from ..geometry import PointCloud
from .rng import Rng


@dataclass
class AugmentConfig:
    enabled: bool = True
    scale_low: float = 0.8
    scale_high: float = 1.2
    shift: float = 0.2
    dropout_prob: float = 0.5
    dropout_max: float = 0.875

    @classmethod
    def from_dict(cls, values: Dict) -> "AugmentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown augmentation key(s): {', '.join(unknown)}")
        cfg = cls(**values)
        if cfg.scale_low > cfg.scale_high or cfg.shift < 0:
            raise ConfigError("augmentation ranges must be non-empty")
        if not (0.0 <= cfg.dropout_prob <= 1.0 and 0.0 <= cfg.dropout_max < 1.0):
            raise ConfigError("dropout_prob must lie in [0, 1] and dropout_max in [0, 1)")
        return cfg


def augment(cloud: PointCloud, rng: Rng, cfg: AugmentConfig = None) -> PointCloud:
    """
    Scale each axis by U[scale_low, scale_high], translate by U[-shift, shift]
    per axis, then with probability dropout_prob overwrite a random
    floor(r * N) points (r ~ U[0, dropout_max]) with the first kept point.

    Every draw is made regardless of the outcome so the stream stays aligned.
    """
    cfg = cfg or AugmentConfig()
    gen = rng.generator
    n = cloud.n
    scale = gen.uniform(cfg.scale_low, cfg.scale_high, size=3)
    shift = gen.uniform(-cfg.shift, cfg.shift, size=3)
    drop = gen.random() < cfg.dropout_prob
    ratio = gen.uniform(0.0, cfg.dropout_max)
    order = gen.permutation(n)

    coords = cloud.coords * scale + shift
    seg_labels = None if cloud.seg_labels is None else cloud.seg_labels.copy()
    attrs = None if cloud.attrs is None else cloud.attrs.copy()
    n_drop = int(math.floor(ratio * n)) if drop else 0
    if 0 < n_drop < n:
        dropped, keeper = order[:n_drop], order[n_drop]
        coords[dropped] = coords[keeper]
        if seg_labels is not None:
            seg_labels[dropped] = seg_labels[keeper]
        if attrs is not None:
            attrs[dropped] = attrs[keeper]
    return PointCloud(coords, attrs, cloud.label, seg_labels, cloud.category)
