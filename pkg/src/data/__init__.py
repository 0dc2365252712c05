"""
Dataset ingestion, synthetic shapes, augmentation and splits.
"""

from .augment import AugmentConfig, augment
from .dataset import Dataset, load_manifest
from .parsers import Mesh, format_xyz, load_off, load_xyz, parse_off, parse_xyz, write_xyz
from .rng import Rng
from .sampling import normalize_unit_sphere, resample, sample_mesh_surface
from .split import split
from .synthetic import PART_IDS, random_rotation, synth_shapes

__all__ = [
    "AugmentConfig",
    "Dataset",
    "Mesh",
    "PART_IDS",
    "Rng",
    "augment",
    "format_xyz",
    "load_manifest",
    "load_off",
    "load_xyz",
    "normalize_unit_sphere",
    "parse_off",
    "parse_xyz",
    "random_rotation",
    "resample",
    "sample_mesh_surface",
    "split",
    "synth_shapes",
    "write_xyz",
]
