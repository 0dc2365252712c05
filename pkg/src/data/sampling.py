"""
Mesh surface sampling, unit-sphere normalisation and resampling to a fixed size.
"""

import numpy as np

from ..errors import DegenerateMeshError, SizeError
from ..geometry import PointCloud
from .parsers import Mesh
from .rng import Rng


def triangle_areas(mesh: Mesh) -> np.ndarray:
    tri = mesh.vertices[mesh.faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def normalize_unit_sphere(points: np.ndarray) -> np.ndarray:
    """Center on the centroid and scale so the farthest point has norm 1."""
    centered = points - np.mean(points, axis=0)
    radius = np.max(np.linalg.norm(centered, axis=1))
    if not radius > 0:
        raise DegenerateMeshError("all sampled points coincide")
    return centered / radius


def sample_mesh_surface(mesh: Mesh, n: int, rng: Rng, return_faces: bool = False):
    """
    Area-weighted uniform sampling of a triangle mesh surface.

    Args:
        mesh: Parsed mesh
        n: Number of points
        rng: Random stream
        return_faces: Also return the triangle index of every sample

    Returns:
        PointCloud normalised to the unit sphere (and the face indices)
    """
    if n < 1:
        raise SizeError(f"cannot sample {n} points")
    areas = triangle_areas(mesh) if mesh.n_faces else np.zeros(0)
    total = float(np.sum(areas))
    if not (total > 0 and np.isfinite(total)):
        raise DegenerateMeshError(f"mesh has zero total surface area ({mesh.n_faces} faces)")
    gen = rng.generator
    faces = gen.choice(mesh.n_faces, size=n, p=areas / total)
    r1 = np.sqrt(gen.random(n))
    r2 = gen.random(n)
    tri = mesh.vertices[mesh.faces[faces]]
    points = (
        (1.0 - r1)[:, None] * tri[:, 0]
        + (r1 * (1.0 - r2))[:, None] * tri[:, 1]
        + (r1 * r2)[:, None] * tri[:, 2]
    )
    cloud = PointCloud(normalize_unit_sphere(points))
    return (cloud, faces) if return_faces else cloud


def resample(cloud: PointCloud, n: int, rng: Rng) -> PointCloud:
    """Random subset of n points, or padding with repeated points when the cloud is smaller."""
    if n < 1:
        raise SizeError(f"cannot resample to {n} points")
    gen = rng.generator
    if cloud.n >= n:
        index = np.sort(gen.choice(cloud.n, size=n, replace=False))
    else:
        index = np.concatenate([np.arange(cloud.n), gen.choice(cloud.n, size=n - cloud.n)])
    return cloud.permute(index)
