"""
Deterministic float64 tensors with reverse-mode gradients.
"""

from .checkpoint import (
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    restore_parameters,
    save_checkpoint,
)
from .gradcheck import GradCheckReport, compute_gradients, finite_diff_check
from .layers import (
    LayerNorm,
    Linear,
    cross_entropy,
    layer_norm,
    linear,
    max_pool,
    relu,
    softmax,
    standardize,
)
from .optim import Adam, adam_step
from .params import ParameterStore
from .tensor import (
    CostMeter,
    Graph,
    KinkMonitor,
    Parameter,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    cost_scope,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    scale,
    sub,
    sum_,
    take,
    transpose,
)

__all__ = [
    "Adam",
    "CostMeter",
    "GradCheckReport",
    "Graph",
    "KinkMonitor",
    "LayerNorm",
    "Linear",
    "Parameter",
    "ParameterStore",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "compute_gradients",
    "concat",
    "cost_scope",
    "cross_entropy",
    "decode_checkpoint",
    "encode_checkpoint",
    "finite_diff_check",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "matmul",
    "max_pool",
    "mean",
    "mul",
    "neg",
    "relu",
    "reshape",
    "restore_parameters",
    "save_checkpoint",
    "scale",
    "softmax",
    "standardize",
    "sub",
    "sum_",
    "take",
    "transpose",
]
