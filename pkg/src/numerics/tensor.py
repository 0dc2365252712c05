"""
Dense tensors with a reverse-mode tape.

Every primitive computes its forward value with numpy (float64) and, when a
`Graph` is active and at least one input is tracked, appends a `Node` holding a
vector-Jacobian closure. `Graph.backward` replays the nodes in reverse and
accumulates into `Parameter.grad`.

Thread-local state keeps the active graph stack, cost meters, cost scopes and
kink monitors, so frozen-parameter evaluation can fan out across threads.
"""

import threading
import weakref
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractError, DimensionError

_state = threading.local()


def _stack(name):
    stack = getattr(_state, name, None)
    if stack is None:
        stack = []
        setattr(_state, name, stack)
    return stack


class Tensor:
    """Immutable float64 array plus a weak link to the graph that produced it."""

    __slots__ = ("data", "_graph")

    def __init__(self, data, copy: bool = True):
        if copy:
            arr = np.array(data, dtype=np.float64)
        else:
            arr = np.asarray(data, dtype=np.float64)
        arr.flags.writeable = False
        self.data = arr
        self._graph = None

    @property
    def graph(self) -> Optional["Graph"]:
        return self._graph() if self._graph is not None else None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, data={self.data!r})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


class Parameter(Tensor):
    """Trainable tensor with a name unique within its model and a gradient slot."""

    __slots__ = ("name", "grad")

    def __init__(self, name: str, data):
        super().__init__(data)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def assign(self, data, copy: bool = True):
        arr = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
        if arr.shape != self.data.shape:
            raise DimensionError(
                f"parameter {self.name}: cannot assign shape {arr.shape} to {self.data.shape}"
            )
        arr.flags.writeable = False
        self.data = arr

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Graph:
    """Ordered record of executed primitives; inputs always precede their consumers."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _stack("graphs").append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack("graphs").pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def tracks(self, tensor: Tensor) -> bool:
        return isinstance(tensor, Parameter) or tensor.graph is self

    def backward(self, loss: Tensor):
        if not isinstance(loss, Tensor) or loss.data.size != 1:
            shape = getattr(loss, "shape", type(loss).__name__)
            raise ContractError(f"backward needs a scalar loss, got shape {shape}")
        if loss.graph is not self:
            raise ContractError("loss was not produced by a forward pass recorded on this graph")

        adjoints = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = adjoints.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.vjp(upstream)):
                if grad is None:
                    continue
                if isinstance(tensor, Parameter):
                    tensor.grad += grad
                elif tensor.graph is self:
                    key = id(tensor)
                    previous = adjoints.get(key)
                    adjoints[key] = grad if previous is None else previous + grad

    def first_nonfinite(self) -> Optional[Tuple[int, Node]]:
        """Position and node of the earliest recorded op with a NaN/Inf output."""
        for position, node in enumerate(self.nodes):
            if not np.all(np.isfinite(node.output.data)):
                return position, node
        return None


def backward(loss: Tensor):
    """Accumulate d(loss)/d(param) into every reachable Parameter.grad."""
    graph = loss.graph if isinstance(loss, Tensor) else None
    if graph is None:
        if isinstance(loss, Tensor) and loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        raise ContractError("loss was not produced by a recorded forward pass")
    graph.backward(loss)


def current_graph() -> Optional[Graph]:
    graphs = _stack("graphs")
    return graphs[-1] if graphs else None


def emit(op: str, inputs: Sequence[Tensor], data: np.ndarray, vjp) -> Tensor:
    """Wrap a freshly computed array and record it on the active graph if needed."""
    out = Tensor(data, copy=False)
    graph = current_graph()
    if graph is not None and any(graph.tracks(t) for t in inputs):
        out._graph = weakref.ref(graph)
        graph.nodes.append(Node(op, tuple(inputs), out, vjp))
    return out


# -- cost metering -----------------------------------------------------------


class CostMeter:
    """Collects multiply-accumulate counts reported by matmuls, keyed by (scope, kind)."""

    def __init__(self):
        self.records = defaultdict(int)

    def __enter__(self):
        _stack("meters").append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack("meters").pop()
        return False

    def add(self, kind: str, macs: int):
        self.records[(current_scope(), kind)] += int(macs)

    @property
    def total(self) -> int:
        return sum(self.records.values())

    def by_scope(self):
        out = defaultdict(int)
        for (scope, _), macs in self.records.items():
            out[scope] += macs
        return dict(out)

    def by_kind(self):
        out = defaultdict(int)
        for (_, kind), macs in self.records.items():
            out[kind] += macs
        return dict(out)


@contextmanager
def cost_scope(name: str):
    scopes = _stack("scopes")
    scopes.append(name)
    try:
        yield
    finally:
        scopes.pop()


def current_scope() -> str:
    scopes = _stack("scopes")
    return scopes[-1] if scopes else "other"


def charge(kind: str, macs: int):
    for meter in _stack("meters"):
        meter.add(kind, macs)


# -- non-smooth decision tracking ---------------------------------------------


class KinkMonitor:
    """Records every ReLU mask and max-pool argmax taken while active."""

    def __init__(self):
        self.decisions = []

    def __enter__(self):
        _stack("kinks").append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack("kinks").pop()
        return False

    def same_decisions(self, other: "KinkMonitor") -> bool:
        if len(self.decisions) != len(other.decisions):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.decisions, other.decisions))


def note_decision(table: np.ndarray):
    for monitor in _stack("kinks"):
        monitor.decisions.append(table)


# -- structural primitives ----------------------------------------------------


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return emit("add", (a, b), a.data + b.data, vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return emit("sub", (a, b), a.data - b.data, vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return emit("mul", (a, b), a.data * b.data, vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return emit("neg", (a,), -a.data, lambda g: (-g,))


def scale(a, factor: float) -> Tensor:
    a = as_tensor(a)
    factor = float(factor)
    return emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def matmul(a, b, kind: str = "linear") -> Tensor:
    """Matrix product; `b` is 2-D (shared across leading axes of `a`) or batched like `a`."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    k, n = b.shape[-2], b.shape[-1]
    if b.ndim == 2:
        rows = int(np.prod(a.shape[:-1]))
    elif a.ndim == b.ndim and a.shape[:-2] == b.shape[:-2]:
        rows = int(np.prod(a.shape[:-1]))
    else:
        raise DimensionError(f"matmul: batch shapes of {a.shape} and {b.shape} differ")
    charge(kind, rows * k * n)

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return emit("matmul", (a, b), a.data @ b.data, vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from exc
    return emit("reshape", (a,), data, lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return emit("transpose", (a,), a.data.transpose(axes), lambda g: (g.transpose(inverse),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=axis))

    return emit("concat", tuple(tensors), data, vjp)


def take(a, index) -> Tensor:
    """Gather rows: out[...] = a[index[...]]; the adjoint scatters with accumulation."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.intp)

    def vjp(g):
        ga = np.zeros(a.shape)
        np.add.at(ga, idx, g)
        return (ga,)

    return emit("take", (a,), a.data[idx], vjp)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return emit("sum", (a,), np.sum(a.data, axis=axis, keepdims=keepdims), vjp)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)
