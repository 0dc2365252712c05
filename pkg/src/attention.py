"""
Class tokens, dual-branch cross-attention and the self-attention baseline.

A cross-attention step lets one branch's class token query the other branch:
the token is projected to the other branch's width (Linear + LN), prepended to
the other branch's patch tokens, attends over that sequence as the single
query, gets a residual add and is projected back (Linear + LN). Patch tokens
are passed through untouched. There is no feed-forward block and no positional
encoding.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import ConfigError, DimensionError
from .grouping import BranchFeatures
from .numerics import (
    LayerNorm,
    Linear,
    Parameter,
    Tensor,
    add,
    concat,
    cost_scope,
    matmul,
    reshape,
    scale,
    softmax,
    take,
    transpose,
)


@dataclass
class BranchTokens:
    cls: Tensor
    patch: Tensor
    branch: str = "large"

    def __post_init__(self):
        if self.cls.shape[0] != 1 or self.cls.shape[1] != self.patch.shape[1]:
            raise DimensionError(
                f"{self.branch} branch: class token {self.cls.shape} does not fit patch {self.patch.shape}"
            )

    @property
    def c(self) -> int:
        return self.cls.shape[1]

    @property
    def n(self) -> int:
        return self.patch.shape[0]

    def sequence(self) -> Tensor:
        if self.n == 0:
            return self.cls
        return concat([self.cls, self.patch], axis=0)


def append_class_token(feats: Union[BranchFeatures, Tensor], cls_param: Tensor, branch: str = "large") -> BranchTokens:
    patch = feats.tokens if isinstance(feats, BranchFeatures) else feats
    if cls_param.shape != (1, patch.shape[1]):
        raise DimensionError(f"class token {cls_param.shape} does not match patch width {patch.shape[1]}")
    return BranchTokens(cls_param, patch, branch)


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(seq, h*dk) -> (h, seq, dk)"""
    seq, width = x.shape
    return transpose(reshape(x, (seq, heads, width // heads)), (1, 0, 2))


def merge_heads(x: Tensor) -> Tensor:
    """(h, seq, dk) -> (seq, h*dk)"""
    heads, seq, dk = x.shape
    return reshape(transpose(x, (1, 0, 2)), (seq, heads * dk))


def multi_head_attention(
    queries: Tensor,
    keys_values: Tensor,
    W_q: Tensor,
    W_k: Tensor,
    W_v: Tensor,
    heads: int,
) -> Tuple[Tensor, Tensor]:
    """
    Softmax(QK^T / sqrt(dk)) V per head.

    Args:
        queries: m x c rows producing Q
        keys_values: s x c rows producing K and V
        W_q, W_k, W_v: c x (h*dk) projections
        heads: Number of heads

    Returns:
        (m x h*dk concatenated head outputs, h x m x s attention weights)
    """
    width = W_q.shape[1]
    if width % heads:
        raise DimensionError(f"attention width {width} is not divisible by {heads} heads")
    dk = width // heads
    q = split_heads(matmul(queries, W_q), heads)
    k = split_heads(matmul(keys_values, W_k), heads)
    v = split_heads(matmul(keys_values, W_v), heads)
    scores = scale(matmul(q, transpose(k, (0, 2, 1)), kind="attn_scores"), 1.0 / np.sqrt(dk))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v, kind="attn_values")
    return merge_heads(out), weights


@dataclass
class CrossAttnParams:
    proj_in: Linear
    ln_in: LayerNorm
    W_q: Parameter
    W_k: Parameter
    W_v: Parameter
    merge: Optional[Linear]
    proj_out: Linear
    ln_out: LayerNorm
    heads: int

    @classmethod
    def create(cls, store, c_self: int, c_other: int, heads: int,
               out_proj: bool = True, eps: float = 1e-5) -> "CrossAttnParams":
        if c_other % heads:
            raise ConfigError(f"heads={heads} must divide attention width {c_other}")
        bound = 1.0 / np.sqrt(c_other)
        return cls(
            proj_in=Linear.create(store, "proj_in", c_self, c_other),
            ln_in=LayerNorm.create(store, "ln_in", c_other, eps),
            W_q=store.uniform("W_q", (c_other, c_other), bound),
            W_k=store.uniform("W_k", (c_other, c_other), bound),
            W_v=store.uniform("W_v", (c_other, c_other), bound),
            merge=Linear.create(store, "merge", c_other, c_other) if out_proj else None,
            proj_out=Linear.create(store, "proj_out", c_other, c_self),
            ln_out=LayerNorm.create(store, "ln_out", c_self, eps),
            heads=heads,
        )

    def parameters(self) -> List[Parameter]:
        params = self.proj_in.parameters() + self.ln_in.parameters() + [self.W_q, self.W_k, self.W_v]
        if self.merge is not None:
            params += self.merge.parameters()
        return params + self.proj_out.parameters() + self.ln_out.parameters()


def cross_attention_step(
    self_branch: BranchTokens,
    other_branch: BranchTokens,
    params: CrossAttnParams,
    return_weights: bool = False,
):
    if params.proj_in.c_in != self_branch.c or params.proj_in.c_out != other_branch.c:
        raise DimensionError(
            f"cross-attention {params.proj_in.c_in}->{params.proj_in.c_out} cannot map "
            f"{self_branch.branch} width {self_branch.c} onto {other_branch.branch} width {other_branch.c}"
        )
    q_tok = params.ln_in(params.proj_in(self_branch.cls))
    if other_branch.n == 0:
        seq = q_tok
    else:
        # Keys in lexicographic row order: the class token is bitwise independent of patch order.
        order = np.lexsort(other_branch.patch.data.T[::-1])
        seq = concat([q_tok, take(other_branch.patch, order)], axis=0)
    attn, weights = multi_head_attention(q_tok, seq, params.W_q, params.W_k, params.W_v, params.heads)
    if params.merge is not None:
        attn = params.merge(attn)
    new_cls = params.ln_out(params.proj_out(add(attn, q_tok)))
    result = BranchTokens(new_cls, self_branch.patch, self_branch.branch)
    return (result, weights) if return_weights else result


@dataclass
class MSAParams:
    W_q: Parameter
    W_k: Parameter
    W_v: Parameter
    merge: Optional[Linear]
    heads: int

    @classmethod
    def create(cls, store, c: int, heads: int, head_dim: Optional[int] = None,
               out_proj: bool = True) -> "MSAParams":
        """Head width defaults to c / heads, the cross-attention head width."""
        if head_dim is None:
            if c % heads:
                raise ConfigError(f"heads={heads} must divide attention width {c}")
            head_dim = c // heads
        width = heads * head_dim
        if not out_proj and width != c:
            raise ConfigError(
                f"self-attention without output projection needs heads*head_dim == {c}, got {width}"
            )
        bound = 1.0 / np.sqrt(c)
        return cls(
            W_q=store.uniform("W_q", (c, width), bound),
            W_k=store.uniform("W_k", (c, width), bound),
            W_v=store.uniform("W_v", (c, width), bound),
            merge=Linear.create(store, "merge", width, c) if out_proj else None,
            heads=heads,
        )

    def parameters(self) -> List[Parameter]:
        params = [self.W_q, self.W_k, self.W_v]
        return params + (self.merge.parameters() if self.merge is not None else [])


def msa_layer(tokens: BranchTokens, params: MSAParams, return_weights: bool = False):
    """Self-attention over [cls; patch] with every token as a query, plus residual."""
    seq = tokens.sequence()
    attn, weights = multi_head_attention(seq, seq, params.W_q, params.W_k, params.W_v, params.heads)
    if params.merge is not None:
        attn = params.merge(attn)
    out = add(seq, attn)
    patch = take(out, np.arange(1, tokens.n + 1))
    result = BranchTokens(take(out, [0]), patch, tokens.branch)
    return (result, weights) if return_weights else result


@dataclass
class StackLayer:
    large: Union[CrossAttnParams, MSAParams]
    small: Union[CrossAttnParams, MSAParams]

    def parameters(self) -> List[Parameter]:
        return self.large.parameters() + self.small.parameters()


@dataclass
class LayerStack:
    layers: List[StackLayer]
    mode: str = "CA"

    @classmethod
    def create(cls, store, c_large: int, c_small: int, heads: int, L: int, mode: str = "CA",
               out_proj: bool = True, msa_head_dim: Optional[int] = None,
               eps: float = 1e-5, msa_full_heads: bool = False) -> "LayerStack":
        if L < 1:
            raise ConfigError(f"a layer stack needs L >= 1, got {L}")
        layers = []
        for i in range(L):
            scope = store.scope(str(i))
            if mode == "CA":
                large = CrossAttnParams.create(scope.scope("large"), c_large, c_small, heads, out_proj, eps)
                small = CrossAttnParams.create(scope.scope("small"), c_small, c_large, heads, out_proj, eps)
            else:
                large = MSAParams.create(scope.scope("large"), c_large, heads,
                                         c_large if msa_full_heads else msa_head_dim, out_proj)
                small = MSAParams.create(scope.scope("small"), c_small, heads,
                                         c_small if msa_full_heads else msa_head_dim, out_proj)
            layers.append(StackLayer(large, small))
        return cls(layers, mode)

    @property
    def L(self) -> int:
        return len(self.layers)

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]


def run_stack(large: BranchTokens, small: BranchTokens, stack: LayerStack) -> Tuple[BranchTokens, BranchTokens]:
    """Both directions of a layer read the previous layer's tokens."""
    for i, layer in enumerate(stack.layers):
        with cost_scope(f"stack.{i}"):
            if stack.mode == "CA":
                new_large = cross_attention_step(large, small, layer.large)
                new_small = cross_attention_step(small, large, layer.small)
            else:
                new_large = msa_layer(large, layer.large)
                new_small = msa_layer(small, layer.small)
        large, small = new_large, new_small
    return large, small
