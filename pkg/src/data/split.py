"""
Deterministic stratified train/test split.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..logger import get_logger
from .dataset import Dataset
from .rng import Rng

logger = get_logger(__name__)


def _largest_remainder(counts: Sequence[int], fraction: float) -> List[int]:
    """Per-class train counts whose sum is round(total * fraction)."""
    exact = [c * fraction for c in counts]
    base = [int(np.floor(e)) for e in exact]
    target = int(round(sum(counts) * fraction))
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[: max(0, target - sum(base))]:
        base[i] += 1
    return base


def split(dataset: Dataset, fractions: Sequence[float] = (2 / 3, 1 / 3), rng: Rng = None) -> Tuple[Dataset, Dataset]:
    """
    Split into (train, test), stratified by class label.

    Falls back to a plain random split with a warning when some class has
    fewer than two samples.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 2 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be two non-negative numbers summing to 1, got {fractions}")
    rng = rng or Rng(0, "split")
    gen = rng.generator
    labels = dataset.labels
    by_class: Dict[int, List[int]] = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)

    if not by_class or min(len(v) for v in by_class.values()) < 2:
        logger.warning("class with fewer than 2 samples; falling back to an unstratified split",
                       n_samples=len(dataset))
        order = gen.permutation(len(dataset))
        n_train = int(round(len(dataset) * fractions[0]))
        train_idx, test_idx = list(order[:n_train]), list(order[n_train:])
    else:
        classes = sorted(by_class)
        quotas = _largest_remainder([len(by_class[c]) for c in classes], fractions[0])
        train_idx, test_idx = [], []
        for c, quota in zip(classes, quotas):
            members = np.asarray(by_class[c])[gen.permutation(len(by_class[c]))]
            train_idx.extend(members[:quota])
            test_idx.extend(members[quota:])
    train_idx = sorted(int(i) for i in train_idx)
    test_idx = sorted(int(i) for i in test_idx)
    return dataset.subset(train_idx, "train"), dataset.subset(test_idx, "test")
