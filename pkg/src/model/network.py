"""
Network assembly: the shared backbone (pyramid, class tokens, layer stack),
the classifier with its four fusion strategies and the part segmenter.
"""

from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..attention import BranchTokens, LayerStack, append_class_token, run_stack
from ..errors import ConfigError, DimensionError, LabelError, SizeError
from ..geometry import PointCloud, canonical_reindex, query_knn
from ..grouping import BranchFeatures, GroupingConfig, Pyramid
from ..numerics import (
    Linear,
    Parameter,
    ParameterStore,
    Tensor,
    add,
    concat,
    cost_scope,
    cross_entropy,
    max_pool,
    mul,
    relu,
    sum_,
    take,
)
from ..numerics.tensor import charge

FUSION_MODES = ("part_tokens", "all_tokens", "all_features", "part_features")
SIGMA_SCOPES = ("sample", "group")
TASKS = ("classify", "segment")


@dataclass
class ModelConfig:
    n_input: int = 512
    d0: int = 16
    d_ratio: int = 2
    k: int = 16
    stages: int = 4
    heads: int = 4
    L: int = 2
    fusion: str = "part_tokens"
    num_classes: int = 3
    sigma_scope: str = "sample"
    msa_baseline: bool = False
    msa_out_proj: bool = True
    msa_head_dim: Optional[int] = None
    msa_full_heads: bool = False
    aux_branch_loss: bool = False
    task: str = "classify"
    num_categories: int = 16
    num_parts: int = 50
    label_embed_dim: int = 64
    seg_hidden: int = 64
    eps: float = 1e-5
    seed: int = 42

    @classmethod
    def from_dict(cls, values: Dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown model config key(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> Dict:
        return asdict(self)

    def replace(self, **changes) -> "ModelConfig":
        return ModelConfig.from_dict({**self.to_dict(), **changes})

    @property
    def c_large(self) -> int:
        return self.d0 * 2 ** (self.stages - 1)

    @property
    def c_small(self) -> int:
        return self.d0 * 2 ** self.stages

    @property
    def uses_tokens(self) -> bool:
        """Class tokens and the layer stack only matter when something reads them."""
        return (
            self.msa_baseline
            or self.task == "segment"
            or self.fusion in ("part_tokens", "all_tokens")
        )

    def violations(self) -> List[str]:
        problems = []
        positive = ("n_input", "d0", "d_ratio", "k", "heads", "L", "num_classes")
        for name in positive:
            if getattr(self, name) < 1:
                problems.append(f"{name}={getattr(self, name)} must be >= 1")
        if self.stages < 2:
            problems.append(f"stages={self.stages} must be >= 2 to form two branches")
        if self.eps <= 0:
            problems.append(f"eps={self.eps} must be > 0")
        if self.fusion not in FUSION_MODES:
            problems.append(f"fusion={self.fusion!r} must be one of {', '.join(FUSION_MODES)}")
        if self.sigma_scope not in SIGMA_SCOPES:
            problems.append(f"sigma_scope={self.sigma_scope!r} must be one of {', '.join(SIGMA_SCOPES)}")
        if self.task not in TASKS:
            problems.append(f"task={self.task!r} must be one of {', '.join(TASKS)}")
        if problems:
            return problems

        reduction = self.d_ratio ** self.stages
        if self.n_input % reduction:
            problems.append(
                f"n_input={self.n_input} must be divisible by d_ratio^stages={reduction}"
            )
        for branch, width in (("large", self.c_large), ("small", self.c_small)):
            if width % self.heads:
                problems.append(f"heads={self.heads} must divide the {branch}-branch width {width}")
        if self.msa_head_dim is not None and self.msa_head_dim < 1:
            problems.append(f"msa_head_dim={self.msa_head_dim} must be >= 1")
        if self.msa_baseline and not self.msa_out_proj:
            for branch, width in (("large", self.c_large), ("small", self.c_small)):
                if self.msa_full_heads:
                    head_dim = width
                elif self.msa_head_dim is None:
                    head_dim = width // self.heads
                else:
                    head_dim = self.msa_head_dim
                if self.heads * head_dim != width:
                    problems.append(
                        f"without msa_out_proj, heads*msa_head_dim must equal the {branch}-branch width {width}"
                    )
        if self.aux_branch_loss and self.task == "classify" and self.fusion not in ("part_tokens", "part_features"):
            problems.append("aux_branch_loss needs a per-branch fusion (part_tokens or part_features)")
        if self.task == "segment":
            for name in ("num_categories", "num_parts", "label_embed_dim", "seg_hidden"):
                if getattr(self, name) < 1:
                    problems.append(f"{name}={getattr(self, name)} must be >= 1")
        return problems

    def validate(self) -> "ModelConfig":
        problems = self.violations()
        if problems:
            raise ConfigError("invalid model config: " + "; ".join(problems))
        return self


@dataclass
class MLPHead:
    """Linear c -> c/2, ReLU, Linear c/2 -> out."""

    hidden: Linear
    out: Linear

    @classmethod
    def create(cls, store, c_in: int, c_out: int, c_hidden: Optional[int] = None) -> "MLPHead":
        c_hidden = c_hidden or max(1, c_in // 2)
        return cls(Linear.create(store, "hidden", c_in, c_hidden), Linear.create(store, "out", c_hidden, c_out))

    def parameters(self) -> List[Parameter]:
        return self.hidden.parameters() + self.out.parameters()

    def __call__(self, x) -> Tensor:
        return self.out(relu(self.hidden(x)))


@dataclass
class Encoded:
    """Backbone outputs for one cloud in canonical point order."""

    perm: np.ndarray
    levels: List[BranchFeatures]
    large: BranchTokens
    small: BranchTokens


class Backbone:
    """Pyramid + class tokens + layer stack, shared by both task heads."""

    def __init__(self, cfg: ModelConfig, store: ParameterStore):
        self.cfg = cfg
        grouping = GroupingConfig(cfg.d_ratio, cfg.k, cfg.eps, cfg.sigma_scope)
        self.pyramid = Pyramid.create(store.scope("pyramid"), cfg.d0, cfg.stages, grouping)
        self.cls_large = self.cls_small = self.stack = None
        if cfg.uses_tokens:
            cls_store = store.scope("cls")
            self.cls_large = cls_store.normal("large", (1, cfg.c_large), 0.02)
            self.cls_small = cls_store.normal("small", (1, cfg.c_small), 0.02)
            self.stack = LayerStack.create(
                store.scope("stack"),
                cfg.c_large,
                cfg.c_small,
                cfg.heads,
                cfg.L,
                mode="MSA" if cfg.msa_baseline else "CA",
                out_proj=cfg.msa_out_proj,
                msa_head_dim=cfg.msa_head_dim,
                eps=cfg.eps,
                msa_full_heads=cfg.msa_full_heads,
            )

    def encode(self, cloud: Union[PointCloud, np.ndarray]) -> Encoded:
        coords = cloud.coords if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
        if coords.shape != (self.cfg.n_input, 3):
            raise SizeError(f"model expects {self.cfg.n_input} x 3 points, got {coords.shape}")
        perm = canonical_reindex(coords, strict=False)
        levels = self.pyramid.levels(coords[perm])
        large_feats, small_feats = levels[-2], levels[-1]
        if self.stack is None:
            large = BranchTokens(Tensor(np.zeros((1, large_feats.c))), large_feats.tokens, "large")
            small = BranchTokens(Tensor(np.zeros((1, small_feats.c))), small_feats.tokens, "small")
            return Encoded(perm, levels, large, small)
        large = append_class_token(large_feats, self.cls_large, "large")
        small = append_class_token(small_feats, self.cls_small, "small")
        large, small = run_stack(large, small, self.stack)
        return Encoded(perm, levels, large, small)


class Classifier:
    """Dual-branch point-cloud classifier."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg.validate()
        self.store = ParameterStore(cfg.seed)
        self.backbone = Backbone(cfg, self.store)
        c_l, c_s, classes = cfg.c_large, cfg.c_small, cfg.num_classes
        self.head = self.head_large = self.head_small = self.align = None
        if cfg.fusion in ("part_tokens", "part_features"):
            self.head_large = MLPHead.create(self.store.scope("head_large"), c_l, classes)
            self.head_small = MLPHead.create(self.store.scope("head_small"), c_s, classes)
        elif cfg.fusion == "all_tokens":
            self.head = MLPHead.create(self.store.scope("head"), c_l + c_s, classes)
        else:
            self.align = Linear.create(self.store, "align", c_l, c_s)
            self.head = MLPHead.create(self.store.scope("head"), c_s, classes)

    def parameters(self) -> List[Parameter]:
        return self.store.parameters()

    def branch_logits(self, cloud) -> Tuple[Tensor, Optional[Tuple[Tensor, Tensor]]]:
        """Fused 1 x C logits and, for per-branch fusions, each branch's logits."""
        enc = self.backbone.encode(cloud)
        large, small = enc.large, enc.small
        fusion = self.cfg.fusion
        if fusion == "part_tokens":
            with cost_scope("head_large"):
                logits_large = self.head_large(large.cls)
            with cost_scope("head_small"):
                logits_small = self.head_small(small.cls)
            return add(logits_large, logits_small), (logits_large, logits_small)
        if fusion == "part_features":
            with cost_scope("head_large"):
                logits_large = self.head_large(max_pool(large.patch, axis=0, keepdims=True)[0])
            with cost_scope("head_small"):
                logits_small = self.head_small(max_pool(small.patch, axis=0, keepdims=True)[0])
            return add(logits_large, logits_small), (logits_large, logits_small)
        if fusion == "all_tokens":
            with cost_scope("head"):
                return self.head(concat([large.cls, small.cls], axis=1)), None
        with cost_scope("align"):
            aligned = self.align(large.patch)
        with cost_scope("head"):
            pooled, _ = max_pool(concat([aligned, small.patch], axis=0), axis=0, keepdims=True)
            return self.head(pooled), None

    def forward(self, cloud) -> Tensor:
        return self.branch_logits(cloud)[0]

    __call__ = forward

    def loss(self, cloud: PointCloud) -> Tuple[Tensor, Tensor]:
        """Cross entropy of the fused logits (plus per-branch terms when enabled)."""
        if cloud.label is None:
            raise LabelError("classification sample has no label")
        logits, branches = self.branch_logits(cloud)
        loss = cross_entropy(logits, [cloud.label])
        if self.cfg.aux_branch_loss and branches is not None:
            for branch in branches:
                loss = add(loss, cross_entropy(branch, [cloud.label]))
        return loss, logits


def build_classifier(cfg: ModelConfig) -> Classifier:
    if cfg.task != "classify":
        cfg = cfg.replace(task="classify")
    return Classifier(cfg)


def forward_classify(model: Classifier, cloud) -> np.ndarray:
    return model.forward(cloud).data[0].copy()


def feature_propagate(
    coarse_pts: np.ndarray,
    coarse_feats: Tensor,
    fine_pts: np.ndarray,
    fine_feats: Optional[Tensor],
    unit: Optional[Linear] = None,
) -> Tensor:
    """
    Interpolate coarse features onto fine points from their 3 nearest coarse
    points with weights 1/(d^2 + 1e-8), concatenate the fine skip features and
    apply Linear + ReLU. Without `unit` the raw interpolation is returned.
    """
    n_coarse = coarse_pts.shape[0]
    if n_coarse < 1:
        raise SizeError("feature propagation needs at least one coarse point")
    table = query_knn(coarse_pts, fine_pts, min(3, n_coarse))
    weights = 1.0 / (table.sq_dist + 1e-8)
    weights = weights / np.sum(weights, axis=1, keepdims=True)
    gathered = take(coarse_feats, table.idx)
    charge("interp", gathered.size)
    interp = sum_(mul(gathered, weights[:, :, None]), axis=1)
    if unit is None:
        return interp
    x = interp if fine_feats is None else concat([interp, fine_feats], axis=1)
    return relu(unit(x))


class PartSegmenter:
    """Per-point part classifier sharing the classification backbone."""

    def __init__(self, cfg: ModelConfig):
        cfg = cfg.replace(task="segment")
        self.cfg = cfg.validate()
        self.store = ParameterStore(cfg.seed)
        self.backbone = Backbone(cfg, self.store)
        dims = self.backbone.pyramid.dims
        hidden = cfg.seg_hidden
        fp_store = self.store.scope("fp")
        self.fp_units = {}
        for level in range(cfg.stages - 1, -1, -1):
            c_in = (cfg.c_small if level == cfg.stages - 1 else hidden) + dims[level]
            self.fp_units[level] = Linear.create(fp_store, str(level), c_in, hidden)
        self.label_embed = Linear.create(self.store, "label_embed", cfg.num_categories, cfg.label_embed_dim)
        self.seg_head = MLPHead.create(
            self.store.scope("seg_head"),
            hidden + 2 * cfg.c_small + cfg.label_embed_dim,
            cfg.num_parts,
            c_hidden=hidden,
        )

    def parameters(self) -> List[Parameter]:
        return self.store.parameters()

    def _onehot(self, category) -> np.ndarray:
        n_cat = self.cfg.num_categories
        if np.ndim(category) == 0:
            index = int(category)
            if not 0 <= index < n_cat:
                raise LabelError(f"category {index} outside [0, {n_cat})")
            onehot = np.zeros(n_cat)
            onehot[index] = 1.0
            return onehot
        onehot = np.asarray(category, dtype=np.float64).reshape(-1)
        if onehot.shape[0] != n_cat:
            raise DimensionError(f"category one-hot has length {onehot.shape[0]}, expected {n_cat}")
        return onehot

    def forward(self, cloud, category) -> Tensor:
        """n_input x num_parts logits, rows in the caller's point order."""
        onehot = self._onehot(category)
        enc = self.backbone.encode(cloud)
        levels = enc.levels
        top = self.cfg.stages

        features = {top: enc.small.patch, top - 1: enc.large.patch}
        with cost_scope("fp"):
            current = features[top]
            for level in range(top - 1, -1, -1):
                skip = features.get(level, levels[level].tokens)
                current = feature_propagate(
                    levels[level + 1].points, current, levels[level].points, skip, self.fp_units[level]
                )
        n = current.shape[0]
        with cost_scope("label_embed"):
            label = self.label_embed(Tensor(onehot[None, :]))
        with cost_scope("seg_head"):
            global_feat, _ = max_pool(enc.small.patch, axis=0, keepdims=True)
            context = concat([global_feat, label, enc.small.cls], axis=1)
            per_point = concat([current, take(context, np.zeros(n, dtype=np.intp))], axis=1)
            logits = self.seg_head(per_point)
        inverse = np.argsort(enc.perm)
        return take(logits, inverse)

    __call__ = forward

    def loss(self, cloud: PointCloud) -> Tuple[Tensor, Tensor]:
        if cloud.seg_labels is None or cloud.category is None:
            raise LabelError("segmentation sample needs part labels and a category")
        logits = self.forward(cloud, cloud.category)
        return cross_entropy(logits, cloud.seg_labels), logits


def build_part_segmenter(cfg: ModelConfig) -> PartSegmenter:
    return PartSegmenter(cfg)


def forward_part_segment(model: PartSegmenter, cloud, category_onehot) -> np.ndarray:
    return model.forward(cloud, category_onehot).data.copy()


def build_model(cfg: ModelConfig):
    return PartSegmenter(cfg) if cfg.task == "segment" else Classifier(cfg)
