"""
MAC and parameter accounting.

MACs are metered from one forward pass: every matmul reports
rows * inner * cols multiply-accumulates under its kind (linear, attn_scores,
attn_values) and the innermost cost scope; feature interpolation reports
points * 3 * channels. Nonlinearities, layer norms and reductions count 0.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..errors import ConfigError, ContractError
from ..numerics import CostMeter

MODES = ("CA", "MSA")


@dataclass
class CostReport:
    macs: int
    params: int
    macs_breakdown: Dict[str, int] = field(default_factory=dict)
    params_breakdown: Dict[str, int] = field(default_factory=dict)
    macs_by_kind: Dict[str, int] = field(default_factory=dict)
    mode: str = "CA"

    def check(self) -> "CostReport":
        if sum(self.macs_breakdown.values()) != self.macs:
            raise ContractError("MAC breakdown does not sum to the total")
        if sum(self.params_breakdown.values()) != self.params:
            raise ContractError("parameter breakdown does not sum to the total")
        return self

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "macs": self.macs,
            "params": self.params,
            "macs_breakdown": dict(self.macs_breakdown),
            "params_breakdown": dict(self.params_breakdown),
            "macs_by_kind": dict(self.macs_by_kind),
        }


def module_key(name: str) -> str:
    """`pyramid.stage2.lin_in.W` -> `pyramid.stage2`, `head_large.out.b` -> `head_large`."""
    parts = name.split(".")
    if parts[0] in ("pyramid", "stack") and len(parts) > 1:
        return ".".join(parts[:2])
    return parts[0]


def count_params(model) -> Dict[str, int]:
    breakdown = defaultdict(int)
    for param in model.parameters():
        breakdown[module_key(param.name)] += param.size
    return dict(breakdown)


def sample_cloud(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).normal(size=(n, 3))


def count_costs(model, mode: Optional[str] = None) -> CostReport:
    """
    Meter one forward pass of `model` (or of its CA/MSA sibling).

    Args:
        model: Classifier or PartSegmenter
        mode: "CA" or "MSA"; a differing mode builds the sibling model from the same config

    Returns:
        CostReport with totals equal to the breakdown sums
    """
    from .network import build_model

    current = "MSA" if model.cfg.msa_baseline else "CA"
    if mode is None:
        mode = current
    if mode not in MODES:
        raise ConfigError(f"cost mode must be one of {MODES}, got {mode!r}")
    if mode != current:
        model = build_model(model.cfg.replace(msa_baseline=(mode == "MSA")))

    coords = sample_cloud(model.cfg.n_input)
    with CostMeter() as meter:
        if model.cfg.task == "segment":
            model.forward(coords, 0)
        else:
            model.forward(coords)
    breakdown = meter.by_scope()
    params = count_params(model)
    return CostReport(
        macs=sum(breakdown.values()),
        params=sum(params.values()),
        macs_breakdown=breakdown,
        params_breakdown=params,
        macs_by_kind=meter.by_kind(),
        mode=mode,
    ).check()
