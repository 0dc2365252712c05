"""
Central-difference verification of analytic gradients.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from ..errors import DeterminismError
from ..logger import get_logger
from .tensor import Graph, KinkMonitor, Parameter

logger = get_logger(__name__)


@dataclass
class GradCheckReport:
    max_rel_err: float = 0.0
    worst_param: Optional[str] = None
    worst_index: Optional[int] = None
    per_param: Dict[str, float] = field(default_factory=dict)
    checked: Dict[str, int] = field(default_factory=dict)
    skipped: int = 0

    @property
    def n_checked(self) -> int:
        return sum(self.checked.values())

    def passed(self, tol: float) -> bool:
        return self.max_rel_err <= tol

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "worst_param": self.worst_param,
            "worst_index": self.worst_index,
            "n_checked": self.n_checked,
            "n_skipped": self.skipped,
        }


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def compute_gradients(closure: Callable, params) -> Dict[str, np.ndarray]:
    """Zero grads, run one recorded forward/backward and return copies of every grad."""
    params = list(params)
    for p in params:
        p.zero_grad()
    with Graph() as graph:
        loss = closure()
    graph.backward(loss)
    return {p.name: p.grad.copy() for p in params}


def _evaluate(closure: Callable):
    with KinkMonitor() as monitor:
        value = float(np.asarray(closure().data).reshape(-1)[0])
    return value, monitor


def finite_diff_check(
    closure: Callable,
    params: Iterable[Parameter],
    h: float = 1e-5,
    tol: float = 1e-5,
    coords_per_param: int = 32,
    seed: int = 0,
    analytic: Optional[Dict[str, np.ndarray]] = None,
) -> GradCheckReport:
    """
    Compare analytic gradients with (f(θ+h) − f(θ−h)) / 2h.

    Args:
        closure: Zero-argument callable returning a scalar loss tensor
        params: Parameters to perturb
        h: Perturbation size
        tol: Tolerance used only for logging the verdict
        coords_per_param: Coordinates sampled per parameter (all if fewer)
        seed: Seed of the coordinate sampler
        analytic: Precomputed gradients by parameter name (computed if absent)

    Returns:
        GradCheckReport
    """
    params = list(params)
    if analytic is None:
        analytic = compute_gradients(closure, params)

    baseline, base_kinks = _evaluate(closure)
    again, _ = _evaluate(closure)
    if baseline != again:
        raise DeterminismError(f"closure is not deterministic: {baseline!r} != {again!r}")

    report = GradCheckReport()
    rng = np.random.default_rng(seed)
    for param in params:
        original = param.data
        wanted = min(coords_per_param, original.size)
        worst = 0.0
        done = 0
        try:
            for flat in rng.permutation(original.size):
                if done >= wanted:
                    break
                values = []
                smooth = True
                for delta in (h, -h):
                    moved = original.copy()
                    moved.flat[flat] += delta
                    param.assign(moved, copy=False)
                    value, kinks = _evaluate(closure)
                    smooth = smooth and kinks.same_decisions(base_kinks)
                    values.append(value)
                param.assign(original, copy=False)
                if not smooth:
                    report.skipped += 1
                    continue
                numeric = (values[0] - values[1]) / (2 * h)
                err = relative_error(float(analytic[param.name].flat[flat]), numeric)
                done += 1
                worst = max(worst, err)
                if err > report.max_rel_err or report.worst_param is None:
                    report.max_rel_err = max(err, report.max_rel_err)
                    report.worst_param = param.name
                    report.worst_index = int(flat)
        finally:
            param.assign(original, copy=False)
        report.per_param[param.name] = worst
        report.checked[param.name] = done

    logger.info(
        "gradient check finished",
        max_rel_err=report.max_rel_err,
        worst_param=report.worst_param,
        checked=report.n_checked,
        skipped=report.skipped,
        passed=report.passed(tol),
    )
    return report
