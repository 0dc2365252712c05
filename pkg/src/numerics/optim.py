"""
Adam optimizer.
"""

from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from ..errors import ContractError
from .tensor import Parameter


def adam_step(
    params: Iterable[Parameter],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    t: int = 1,
    state: Optional[Dict[str, Tuple[np.ndarray, np.ndarray]]] = None,
):
    """One bias-corrected Adam update of every parameter; gradients are zeroed afterwards."""
    if t < 1:
        raise ContractError(f"adam step counter must start at 1, got {t}")
    if state is None:
        state = {}
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for param in params:
        m, v = state.get(param.name, (None, None))
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        g = param.grad
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state[param.name] = (m, v)
        step = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        param.assign(param.data - step, copy=False)
        param.zero_grad()
    return state


class Adam:
    """Stateful wrapper keeping the moment buffers and the step counter."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.t = 0
        self.state: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}

    def step(self):
        self.t += 1
        adam_step(
            self.params,
            lr=self.lr,
            beta1=self.betas[0],
            beta2=self.betas[1],
            eps=self.eps,
            t=self.t,
            state=self.state,
        )

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()
