"""
Analytic sphere / cube / cylinder surfaces for desk-scale experiments.

All shapes fit the unit sphere: sphere radius 1, cube half-extent 1/sqrt(3),
cylinder radius = half-height = 1/sqrt(2). Part ids are global across
categories: sphere {0}, cube faces {1..6}, cylinder cap {7} and side {8}.
"""

from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, SizeError
from ..geometry import PointCloud
from .dataset import Dataset
from .rng import Rng

PART_IDS: Dict[str, List[int]] = {
    "sphere": [0],
    "cube": [1, 2, 3, 4, 5, 6],
    "cylinder": [7, 8],
}
CYLINDER_CAP, CYLINDER_SIDE = 7, 8


def sample_sphere(n: int, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    points = gen.normal(size=(n, 3))
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    return points, np.zeros(n, dtype=np.int64)


def sample_cube(n: int, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    half = 1.0 / np.sqrt(3.0)
    face = gen.integers(0, 6, size=n)
    points = gen.uniform(-half, half, size=(n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -half, half)
    points[np.arange(n), axis] = sign
    return points, face.astype(np.int64) + 1


def sample_cylinder(n: int, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    r = 1.0 / np.sqrt(2.0)
    # side area 4*pi*r^2 against 2*pi*r^2 for both caps
    on_side = gen.random(n) < 2.0 / 3.0
    theta = gen.uniform(0.0, 2.0 * np.pi, size=n)
    radius = np.where(on_side, r, r * np.sqrt(gen.random(n)))
    z_side = gen.uniform(-r, r, size=n)
    z_cap = np.where(gen.random(n) < 0.5, -r, r)
    points = np.stack(
        [radius * np.cos(theta), radius * np.sin(theta), np.where(on_side, z_side, z_cap)],
        axis=1,
    )
    return points, np.where(on_side, CYLINDER_SIDE, CYLINDER_CAP).astype(np.int64)


SAMPLERS: Dict[str, Callable] = {
    "sphere": sample_sphere,
    "cube": sample_cube,
    "cylinder": sample_cylinder,
}


def random_rotation(gen: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(gen.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def synth_shapes(
    classes: Sequence[str] = ("sphere", "cube", "cylinder"),
    per_class: int = 100,
    n_points: int = 512,
    seed: int = 42,
    segmentation: bool = False,
    rotate: bool = True,
) -> Dataset:
    """
    Generate `per_class` randomly rotated samples of every requested shape.

    Args:
        classes: Shape names, in label order
        per_class: Samples per shape
        n_points: Points per sample
        seed: Global seed
        segmentation: Attach part labels and categories
        rotate: Apply a random rotation per sample

    Returns:
        Dataset labelled by position in `classes`
    """
    if n_points < 8:
        raise SizeError(f"synthetic shapes need at least 8 points, got {n_points}")
    unknown = [name for name in classes if name not in SAMPLERS]
    if unknown:
        raise ConfigError(f"unknown synthetic shape(s): {', '.join(unknown)}")

    samples = []
    for label, name in enumerate(classes):
        for index in range(per_class):
            gen = Rng(seed, f"synth/{name}", index).generator
            points, parts = SAMPLERS[name](n_points, gen)
            if rotate:
                points = points @ random_rotation(gen).T
            samples.append(PointCloud(
                points,
                label=label,
                seg_labels=parts if segmentation else None,
                category=label if segmentation else None,
            ))
    parts_by_category = {label: PART_IDS[name] for label, name in enumerate(classes)} if segmentation else None
    return Dataset(samples, list(classes), parts_by_category)
