"""
Layer primitives composed by the network: linear, layer norm, softmax,
max-pool, ReLU, cross entropy and the standard-deviation normaliser.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError, EmptyGroupError, LabelError, NumericError, SizeError
from .tensor import Parameter, Tensor, add, as_tensor, emit, matmul, note_decision


def linear(x, W: Tensor, b: Optional[Tensor] = None, kind: str = "linear") -> Tensor:
    """out = x @ W (+ b); works on any leading shape of x."""
    x = as_tensor(x)
    if W.ndim != 2 or x.ndim < 1 or x.shape[-1] != W.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {W.shape}")
    if x.ndim == 1:
        raise DimensionError(f"linear: input {x.shape} needs a row axis")
    out = matmul(x, W, kind=kind)
    if b is not None:
        if b.shape != (W.shape[1],):
            raise DimensionError(f"linear: bias {b.shape} does not match weight {W.shape}")
        out = add(out, b)
    return out


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    note_decision(mask)
    return emit("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if x.shape[axis] < 1:
        raise SizeError("softmax over an empty axis")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def vjp(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return emit("softmax", (x,), y, vjp)


def layer_norm(x, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalisation over the last axis using the population variance."""
    x = as_tensor(x)
    c = x.shape[-1]
    if c < 1 or gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(
            f"layer_norm: input {x.shape} does not match gamma {gamma.shape} / beta {beta.shape}"
        )
    mu = np.mean(x.data, axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    reduce_axes = tuple(range(x.ndim - 1))

    def vjp(g):
        gxhat = g * gamma.data
        gx = rstd * (
            gxhat
            - np.mean(gxhat, axis=-1, keepdims=True)
            - xhat * np.mean(gxhat * xhat, axis=-1, keepdims=True)
        )
        return gx, np.sum(g * xhat, axis=reduce_axes), np.sum(g, axis=reduce_axes)

    return emit("layer_norm", (x, gamma, beta), xhat * gamma.data + beta.data, vjp)


def max_pool(x, axis: int = 1, keepdims: bool = False):
    """Max over `axis`; returns (pooled, argmax). Ties go to the lowest index."""
    x = as_tensor(x)
    axis = axis % x.ndim
    if x.shape[axis] == 0:
        raise EmptyGroupError(f"max_pool over an empty axis {axis} of shape {x.shape}")
    arg = np.argmax(x.data, axis=axis)
    note_decision(arg)
    arg_kept = np.expand_dims(arg, axis)
    pooled = np.take_along_axis(x.data, arg_kept, axis=axis)
    if not keepdims:
        pooled = np.squeeze(pooled, axis=axis)

    def vjp(g):
        gx = np.zeros(x.shape)
        g_kept = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(gx, arg_kept, g_kept, axis=axis)
        return (gx,)

    return emit("max_pool", (x,), pooled, vjp), arg


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of `labels` under softmax(logits)."""
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects n x C logits, got {logits.shape}")
    n, num_classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise DimensionError(f"cross_entropy: {labels.shape[0]} labels for {n} rows")
    if n == 0:
        raise SizeError("cross_entropy over zero rows")
    bad = (labels < 0) | (labels >= num_classes)
    if np.any(bad):
        raise LabelError(f"label {int(labels[bad][0])} outside [0, {num_classes})")

    rows = np.arange(n)
    top = np.max(logits.data, axis=1, keepdims=True)
    lse = top + np.log(np.sum(np.exp(logits.data - top), axis=1, keepdims=True))
    loss = np.mean(lse[:, 0] - logits.data[rows, labels])

    def vjp(g):
        probs = np.exp(logits.data - lse)
        probs[rows, labels] -= 1.0
        return (probs * (g / n),)

    return emit("cross_entropy", (logits,), np.asarray(loss), vjp)


def standardize(x, eps: float, axes=None):
    """
    Divide by the population standard deviation taken over `axes`.

    Args:
        x: Input tensor
        eps: Added to sigma before dividing
        axes: Axes reduced for sigma; None means every axis

    Returns:
        (x / (sigma + eps), sigma) with sigma squeezed to the kept axes
    """
    x = as_tensor(x)
    if axes is None:
        axes = tuple(range(x.ndim))
    axes = tuple(a % x.ndim for a in axes)
    count = int(np.prod([x.shape[a] for a in axes]))
    if count == 0:
        raise SizeError(f"standardize over an empty block of shape {x.shape}")
    centered = x.data - np.mean(x.data, axis=axes, keepdims=True)
    sigma = np.sqrt(np.mean(centered * centered, axis=axes, keepdims=True))
    if not np.all(np.isfinite(sigma)):
        raise NumericError("non-finite standard deviation in group normalisation")
    denom = sigma + eps
    positive = sigma > 0
    safe_sigma = np.where(positive, sigma, 1.0)
    dsigma = np.where(positive, centered / (count * safe_sigma), 0.0)

    def vjp(g):
        inner = np.sum(g * x.data, axis=axes, keepdims=True) / (denom * denom)
        return (g / denom - inner * dsigma,)

    out = emit("standardize", (x,), x.data / denom, vjp)
    return out, np.squeeze(sigma, axis=axes)


@dataclass
class Linear:
    W: Parameter
    b: Optional[Parameter] = None

    @classmethod
    def create(cls, store, name: str, c_in: int, c_out: int, bias: bool = True) -> "Linear":
        scope = store.scope(name)
        bound = 1.0 / np.sqrt(c_in)
        W = scope.uniform("W", (c_in, c_out), bound)
        b = scope.uniform("b", (c_out,), bound) if bias else None
        return cls(W, b)

    @property
    def c_in(self) -> int:
        return self.W.shape[0]

    @property
    def c_out(self) -> int:
        return self.W.shape[1]

    def parameters(self):
        return [self.W] if self.b is None else [self.W, self.b]

    def __call__(self, x, kind: str = "linear") -> Tensor:
        return linear(x, self.W, self.b, kind=kind)


@dataclass
class LayerNorm:
    gamma: Parameter
    beta: Parameter
    eps: float = 1e-5

    @classmethod
    def create(cls, store, name: str, c: int, eps: float = 1e-5) -> "LayerNorm":
        scope = store.scope(name)
        return cls(scope.ones("gamma", (c,)), scope.zeros("beta", (c,)), eps)

    def parameters(self):
        return [self.gamma, self.beta]

    def __call__(self, x) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)
