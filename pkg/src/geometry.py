"""
Point sets and deterministic sampling kernels.

All kernels work on squared Euclidean distances and break ties by the
lexicographic (x, y, z) order of the points, then by original index, so their
output depends only on the point set and not on the row order it arrived in.
The brute_force_* functions are plain-Python references computing the same
float operations in the same order.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, DuplicatePointError, NumericError, SizeError


@dataclass
class PointCloud:
    coords: np.ndarray
    attrs: Optional[np.ndarray] = None
    label: Optional[int] = None
    seg_labels: Optional[np.ndarray] = None
    category: Optional[int] = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise DimensionError(f"point coordinates must be N x 3, got {self.coords.shape}")
        if self.coords.shape[0] < 1:
            raise SizeError("a point cloud needs at least one point")
        if not np.all(np.isfinite(self.coords)):
            raise NumericError("point coordinates must be finite")
        n = self.coords.shape[0]
        if self.attrs is not None:
            self.attrs = np.asarray(self.attrs, dtype=np.float64)
            if self.attrs.shape[0] != n:
                raise DimensionError(f"{self.attrs.shape[0]} attribute rows for {n} points")
        if self.seg_labels is not None:
            self.seg_labels = np.asarray(self.seg_labels, dtype=np.int64)
            if self.seg_labels.shape != (n,):
                raise DimensionError(f"{self.seg_labels.shape} part labels for {n} points")

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.n

    def permute(self, perm) -> "PointCloud":
        perm = np.asarray(perm, dtype=np.intp)
        return replace(
            self,
            coords=self.coords[perm],
            attrs=None if self.attrs is None else self.attrs[perm],
            seg_labels=None if self.seg_labels is None else self.seg_labels[perm],
        )

    def duplicate_count(self) -> int:
        ordered = self.coords[canonical_order(self.coords)]
        return int(np.count_nonzero(np.all(ordered[1:] == ordered[:-1], axis=1)))

    def validate(self, strict: bool = True) -> int:
        """Return the number of coincident points; strict mode rejects any."""
        duplicates = self.duplicate_count()
        if strict and duplicates:
            raise DuplicatePointError(f"{duplicates} duplicate point(s) in a cloud of {self.n}")
        return duplicates


@dataclass
class SampleResult:
    indices: np.ndarray

    def __len__(self):
        return len(self.indices)


@dataclass
class NeighborTable:
    idx: np.ndarray
    sq_dist: np.ndarray

    @property
    def k(self) -> int:
        return self.idx.shape[1]


Points = Union[PointCloud, np.ndarray]


def _coords(points: Points) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.coords
    coords = np.asarray(points, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise DimensionError(f"point coordinates must be N x 3, got {coords.shape}")
    return coords


def canonical_order(coords: np.ndarray) -> np.ndarray:
    """Stable lexicographic (x, y, z) sort order."""
    return np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))


def canonical_reindex(cloud: Points, strict: bool = True) -> np.ndarray:
    """
    Permutation sorting the points lexicographically by (x, y, z).

    Args:
        cloud: PointCloud or N x 3 array
        strict: Reject coincident points

    Returns:
        Index array `perm` such that coords[perm] is canonically ordered
    """
    coords = _coords(cloud)
    perm = canonical_order(coords)
    if strict:
        ordered = coords[perm]
        same = np.all(ordered[1:] == ordered[:-1], axis=1)
        if np.any(same):
            first = int(perm[int(np.argmax(same)) + 1])
            raise DuplicatePointError(
                f"{int(np.count_nonzero(same))} duplicate point(s); first at row {first}"
            )
    return perm


def _sq_dist(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = points - center
    return diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]


def farthest_point_sample(cloud: Points, n: int) -> SampleResult:
    """Greedy farthest point sampling seeded at the lexicographically smallest point."""
    coords = _coords(cloud)
    total = coords.shape[0]
    if n < 1 or n > total:
        raise SizeError(f"cannot sample {n} of {total} points")

    order = canonical_order(coords)
    pts = coords[order]
    picked = np.empty(n, dtype=np.intp)
    min_dist = np.full(total, np.inf)
    current = 0
    for i in range(n):
        picked[i] = current
        min_dist = np.minimum(min_dist, _sq_dist(pts, pts[current]))
        min_dist[current] = -np.inf
        current = int(np.argmax(min_dist))
    return SampleResult(order[picked])


def query_knn(reference: Points, queries, k: int) -> NeighborTable:
    """k nearest reference points of each query row, canonical tie order."""
    ref = _coords(reference)
    queries = _coords(queries)
    total = ref.shape[0]
    if k < 1 or k > total:
        raise SizeError(f"cannot take {k} neighbours among {total} points")

    order = canonical_order(ref)
    d = _sq_dist(ref[order][None, :, :], queries[:, None, :])
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    return NeighborTable(order[nearest], np.take_along_axis(d, nearest, axis=1))


def knn_search(cloud: Points, centers: Union[SampleResult, Sequence[int]], k: int) -> NeighborTable:
    coords = _coords(cloud)
    indices = centers.indices if isinstance(centers, SampleResult) else np.asarray(centers)
    return query_knn(coords, coords[indices], k)


def _lex_key(points: Sequence[Sequence[float]], i: int):
    x, y, z = points[i]
    return (x, y, z, i)


def brute_force_fps(points: Sequence[Sequence[float]], n: int) -> List[int]:
    points = [tuple(float(v) for v in p) for p in points]
    if n < 1 or n > len(points):
        raise SizeError(f"cannot sample {n} of {len(points)} points")
    visit = sorted(range(len(points)), key=lambda i: _lex_key(points, i))
    chosen = [visit[0]]
    taken = {visit[0]}
    min_dist = {}
    while len(chosen) < n:
        cx, cy, cz = points[chosen[-1]]
        best, best_d = None, None
        for j in visit:
            if j in taken:
                continue
            x, y, z = points[j]
            dx, dy, dz = x - cx, y - cy, z - cz
            d = dx * dx + dy * dy + dz * dz
            min_dist[j] = d if j not in min_dist else min(min_dist[j], d)
            if best is None or min_dist[j] > best_d:
                best, best_d = j, min_dist[j]
        chosen.append(best)
        taken.add(best)
    return chosen


def brute_force_knn(points, queries, k: int) -> List[List[int]]:
    points = [tuple(float(v) for v in p) for p in points]
    rows = []
    for q in queries:
        qx, qy, qz = (float(v) for v in q)
        scored = []
        for i, (x, y, z) in enumerate(points):
            dx, dy, dz = x - qx, y - qy, z - qz
            scored.append((dx * dx + dy * dy + dz * dz, x, y, z, i))
        scored.sort()
        rows.append([entry[-1] for entry in scored[:k]])
    return rows
