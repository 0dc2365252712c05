"""
Named parameter registry with deterministic, seeded initialisation.
"""

from typing import Dict, Iterator, List, Optional

import numpy as np

from ..errors import ContractError
from .tensor import Parameter


class ParameterStore:
    """
    Registry of uniquely named parameters.

    `scope(name)` returns a view sharing the registry and random stream, so
    nested modules produce dotted names like `stack.0.large.W_q`. Registration
    order is the checkpoint order.
    """

    def __init__(self, seed: int = 0, prefix: str = "", _registry=None, _rng=None):
        self.seed = seed
        self.prefix = prefix
        self._registry: Dict[str, Parameter] = {} if _registry is None else _registry
        self._rng = np.random.default_rng(seed) if _rng is None else _rng

    def scope(self, name) -> "ParameterStore":
        return ParameterStore(self.seed, self._qualify(str(name)), self._registry, self._rng)

    def _qualify(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def add(self, name: str, data) -> Parameter:
        full = self._qualify(name)
        if full in self._registry:
            raise ContractError(f"duplicate parameter name {full}")
        param = Parameter(full, data)
        self._registry[full] = param
        return param

    def uniform(self, name: str, shape, bound: float) -> Parameter:
        return self.add(name, self._rng.uniform(-bound, bound, size=shape))

    def normal(self, name: str, shape, std: float) -> Parameter:
        return self.add(name, self._rng.normal(0.0, std, size=shape))

    def zeros(self, name: str, shape) -> Parameter:
        return self.add(name, np.zeros(shape))

    def ones(self, name: str, shape) -> Parameter:
        return self.add(name, np.ones(shape))

    def parameters(self) -> List[Parameter]:
        if not self.prefix:
            return list(self._registry.values())
        head = self.prefix + "."
        return [p for name, p in self._registry.items() if name.startswith(head)]

    def named_parameters(self) -> Dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def numel(self) -> int:
        return sum(p.size for p in self.parameters())

    def get(self, name: str) -> Optional[Parameter]:
        return self._registry.get(name)

    def __getitem__(self, name: str) -> Parameter:
        return self._registry[name]

    def __contains__(self, name: str) -> bool:
        return name in self._registry

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self.parameters())

    def __len__(self) -> int:
        return len(self.parameters())

    def zero_grad(self):
        for param in self.parameters():
            param.zero_grad()
