"""
Dataset container and manifest loading.

A manifest is a UTF-8 text file with one `path,label[,split]` line per sample;
relative paths resolve against the manifest's directory. `.xyz` files are
resampled to the requested size, `.off` meshes are surface-sampled.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from ..errors import LabelError, ParseError, SizeError
from ..geometry import PointCloud


@dataclass
class Dataset:
    samples: List[PointCloud]
    class_names: List[str]
    parts_by_category: Optional[Dict[int, List[int]]] = None
    split: str = "all"

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[PointCloud]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> PointCloud:
        return self.samples[index]

    @property
    def labels(self) -> List[int]:
        return [s.label for s in self.samples]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_points(self) -> Optional[int]:
        return self.samples[0].n if self.samples else None

    def subset(self, indices: Sequence[int], split: str = None) -> "Dataset":
        return replace(self, samples=[self.samples[i] for i in indices], split=split or self.split)

    def map(self, fn) -> "Dataset":
        return replace(self, samples=[fn(s) for s in self.samples])

    def validate(self) -> "Dataset":
        if not self.samples:
            raise SizeError(f"{self.split} dataset is empty")
        sizes = {s.n for s in self.samples}
        if len(sizes) != 1:
            raise SizeError(f"samples have different point counts: {sorted(sizes)}")
        for i, s in enumerate(self.samples):
            if s.label is None or not 0 <= s.label < self.num_classes:
                raise LabelError(f"sample {i}: label {s.label} outside [0, {self.num_classes})")
        return self


def load_manifest(path, n_points: int, seed: int = 42) -> Dict[str, Dataset]:
    """
    Read a manifest into one Dataset per split tag ("all" when no tag is given).

    Args:
        path: Manifest file
        n_points: Points per sample after resampling
        seed: Seed of the per-sample sampling streams

    Returns:
        dict mapping split tag to Dataset; all share one sorted class vocabulary
    """
    from .parsers import load_off, load_xyz
    from .rng import Rng
    from .sampling import resample, sample_mesh_surface

    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except OSError as e:
        raise ParseError(f"cannot read manifest: {e}", source=str(path)) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"manifest is not UTF-8 (byte {e.start})", source=str(path)) from e

    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
            raise ParseError("expected path,label[,split]", lineno, None, str(path))
        entries.append((lineno, parts[0], parts[1], parts[2] if len(parts) == 3 and parts[2] else "all"))
    if not entries:
        raise ParseError("manifest lists no samples", source=str(path))

    class_names = sorted({label for _, _, label, _ in entries})
    by_split: Dict[str, List[PointCloud]] = {}
    for index, (lineno, rel, label, tag) in enumerate(entries):
        sample_path = (path.parent / rel) if not Path(rel).is_absolute() else Path(rel)
        suffix = sample_path.suffix.lower()
        if suffix == ".off":
            cloud = sample_mesh_surface(load_off(sample_path), n_points, Rng(seed, "surface", index))
        elif suffix == ".xyz":
            cloud = resample(load_xyz(sample_path), n_points, Rng(seed, "resample", index))
        else:
            raise ParseError(f"unsupported sample format '{suffix}'", lineno, None, str(path))
        cloud = replace(cloud, label=class_names.index(label))
        by_split.setdefault(tag, []).append(cloud)
    return {tag: Dataset(samples, class_names, split=tag) for tag, samples in by_split.items()}
