"""Finite-difference verification of analytic gradients.

Central differences in double precision against a fixed random projection of
the op output. Single precision is useless here: the subtraction noise floor
sits right where the interesting errors are.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor, no_grad, tsum, mul


@dataclass
class InputReport:
    index: int
    max_rel_error: float
    checked_elements: int


@dataclass
class GradCheckReport:
    tolerance: float
    inputs: list = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((r.max_rel_error for r in self.inputs), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def check_gradients(op_closure: Callable[..., Tensor], inputs: Sequence[Tensor],
                    tolerance: float = 1e-4, step: float = 1e-3,
                    sample: Optional[int] = None, seed: int = 0) -> GradCheckReport:
    """Compare backward() gradients of ``op_closure(*inputs)`` against central
    finite differences, element by element.

    All inputs must be float64 leaves. ``sample`` limits the check to that many
    randomly chosen elements per input (used for composite whole-model checks
    where two forward passes per element would be prohibitive). Reports, never
    raises: read ``report.passed``.
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError("gradient checking requires float64 inputs")
        if not t.is_leaf():
            raise ValueError("inputs must be graph leaves")

    rng = np.random.default_rng(seed)
    with no_grad():
        probe = op_closure(*inputs)
    projection = rng.standard_normal(probe.shape)

    def scalar() -> float:
        with no_grad():
            return float((op_closure(*inputs).data * projection).sum())

    # analytic pass
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = op_closure(*inputs)
    loss = tsum(mul(out, Tensor(projection)))
    loss.backward()

    report = GradCheckReport(tolerance=tolerance)
    for idx, t in enumerate(inputs):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        n = flat.size
        if sample is not None and sample < n:
            elements = rng.choice(n, size=sample, replace=False)
        else:
            elements = np.arange(n)
        worst = 0.0
        for e in elements:
            orig = flat[e]
            flat[e] = orig + step
            f_plus = scalar()
            flat[e] = orig - step
            f_minus = scalar()
            flat[e] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            a = analytic.reshape(-1)[e]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, rel)
        report.inputs.append(InputReport(idx, worst, len(elements)))
    return report
