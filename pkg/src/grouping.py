"""
Multi-scale grouping: point embedding, normalised relative grouping with a
learnable per-channel shift, residual-MLP aggregation and the stage pyramid.

Each stage samples n/d_ratio centers by FPS in coordinate space, gathers the
k nearest parent points, normalises the token differences by one scalar
standard deviation (per sample, or per group with sigma_scope="group"),
applies alpha * x + beta, runs the residual MLP (d -> 2d) per neighbour and
max-pools over the group.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, SizeError
from .geometry import NeighborTable, PointCloud, SampleResult, farthest_point_sample, knn_search
from .numerics import (
    Linear,
    Parameter,
    Tensor,
    add,
    cost_scope,
    max_pool,
    mul,
    relu,
    reshape,
    standardize,
    sub,
    take,
)

SIGMA_SCOPES = ("sample", "group")


@dataclass
class GroupingConfig:
    d_ratio: int = 2
    k: int = 16
    eps: float = 1e-5
    sigma_scope: str = "sample"

    def __post_init__(self):
        if self.sigma_scope not in SIGMA_SCOPES:
            raise ConfigError(f"sigma_scope must be one of {SIGMA_SCOPES}, got {self.sigma_scope!r}")


@dataclass
class BranchFeatures:
    points: np.ndarray
    tokens: Tensor
    patch: Optional["GroupedPatch"] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.tokens.shape[0]

    @property
    def c(self) -> int:
        return self.tokens.shape[1]


@dataclass
class GroupedPatch:
    centers: np.ndarray
    center_index: np.ndarray
    nbrs: NeighborTable
    center_feats: Tensor
    normalized: Tensor
    shifted: Tensor
    sigma: np.ndarray


@dataclass
class GroupStageParams:
    alpha: Parameter
    beta: Parameter
    lin_in: Linear
    res1: Linear
    res2: Linear
    eps: float = 1e-5

    @classmethod
    def create(cls, store, d: int, eps: float = 1e-5) -> "GroupStageParams":
        return cls(
            alpha=store.ones("alpha", (d,)),
            beta=store.zeros("beta", (d,)),
            lin_in=Linear.create(store, "lin_in", d, 2 * d),
            res1=Linear.create(store, "res1", 2 * d, 2 * d),
            res2=Linear.create(store, "res2", 2 * d, 2 * d),
            eps=eps,
        )

    @property
    def d(self) -> int:
        return self.alpha.shape[0]

    def parameters(self) -> List[Parameter]:
        params = [self.alpha, self.beta]
        for layer in (self.lin_in, self.res1, self.res2):
            params.extend(layer.parameters())
        return params


def embed_points(cloud, W_embed: Tensor) -> BranchFeatures:
    """Linear point embedding tokens = coords @ W (3 -> d0, no bias)."""
    coords = cloud.coords if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    embed = Linear(W_embed) if not isinstance(W_embed, Linear) else W_embed
    return BranchFeatures(coords, embed(Tensor(coords)))


def group_normalize(
    parent: BranchFeatures,
    centers: SampleResult,
    nbrs: NeighborTable,
    params: GroupStageParams,
    sigma_scope: str = "sample",
) -> GroupedPatch:
    n, k = nbrs.idx.shape
    d = parent.c
    center_feats = take(parent.tokens, centers.indices)
    neighbour_feats = take(parent.tokens, nbrs.idx)
    rel = sub(neighbour_feats, reshape(center_feats, (n, 1, d)))
    axes = None if sigma_scope == "sample" else (1, 2)
    normalized, sigma = standardize(rel, params.eps, axes=axes)
    shifted = add(mul(normalized, params.alpha), params.beta)
    return GroupedPatch(
        centers=parent.points[centers.indices],
        center_index=centers.indices,
        nbrs=nbrs,
        center_feats=center_feats,
        normalized=normalized,
        shifted=shifted,
        sigma=sigma,
    )


def residual_mlp(x, params: GroupStageParams) -> Tensor:
    h = params.lin_in(x)
    return relu(add(h, params.res2(relu(params.res1(h)))))


def aggregate_group(patch: GroupedPatch, params: GroupStageParams) -> BranchFeatures:
    pooled, _ = max_pool(residual_mlp(patch.shifted, params), axis=1)
    return BranchFeatures(patch.centers, pooled, patch)


def run_stage(
    parent: BranchFeatures,
    cfg: GroupingConfig,
    params: GroupStageParams,
) -> BranchFeatures:
    n_out = parent.n // cfg.d_ratio
    if n_out < 1:
        raise SizeError(f"stage input of {parent.n} points cannot be reduced by d_ratio={cfg.d_ratio}")
    k = min(cfg.k, parent.n)
    centers = farthest_point_sample(parent.points, n_out)
    nbrs = knn_search(parent.points, centers, k)
    patch = group_normalize(parent, centers, nbrs, params, cfg.sigma_scope)
    return aggregate_group(patch, params)


@dataclass
class Pyramid:
    embed: Linear
    stages: List[GroupStageParams]
    cfg: GroupingConfig

    @classmethod
    def create(cls, store, d0: int, n_stages: int, cfg: GroupingConfig) -> "Pyramid":
        embed = Linear.create(store, "embed", 3, d0, bias=False)
        stages = [
            GroupStageParams.create(store.scope(f"stage{i}"), d0 * 2 ** i, cfg.eps)
            for i in range(n_stages)
        ]
        return cls(embed, stages, cfg)

    @property
    def dims(self) -> List[int]:
        d0 = self.embed.c_out
        return [d0 * 2 ** i for i in range(len(self.stages) + 1)]

    def parameters(self) -> List[Parameter]:
        params = self.embed.parameters()
        for stage in self.stages:
            params.extend(stage.parameters())
        return params

    def levels(self, cloud) -> List[BranchFeatures]:
        """Embedding followed by every stage output, finest first."""
        with cost_scope("pyramid.embed"):
            current = embed_points(cloud, self.embed)
        out = [current]
        for i, stage in enumerate(self.stages):
            with cost_scope(f"pyramid.stage{i}"):
                current = run_stage(current, self.cfg, stage)
            out.append(current)
        return out


def build_pyramid(cloud, pyramid: Pyramid) -> Tuple[BranchFeatures, BranchFeatures]:
    """Large branch = second-to-last stage output, small branch = last."""
    levels = pyramid.levels(cloud)
    return levels[-2], levels[-1]
