from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np

from src.core.errors import DomainError
from src.kernels.kernel import Kernel

logger = logging.getLogger(__name__)

_MONOTONE_RTOL = 1e-12


@dataclass(frozen=True)
class KernelReport:
    is_nonincreasing: bool
    lower_bound_a: float
    linear_decay_ok: bool
    derivative_constant_C: Optional[float]
    range_ok: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _finite_difference(kernel: Kernel, s: np.ndarray, h: float) -> np.ndarray:
    left = np.maximum(s - h, 0.0)
    right = s + h
    # one-sided where the grid touches zero
    return (kernel.values(right) - kernel.values(left)) / (right - left)


def check_kernel_assumptions(kernel: Kernel, s_min: float, s_max: float, samples: int) -> KernelReport:
    """
    Sample the standing assumptions on rho over [s_min, s_max]:
    monotonicity, the linear decay rho(s2) <= (s1/s2) rho(s1) for 1 <= s1 < s2,
    and the constant C in s |rho'(s)| <= C rho(s).
    """
    if not (0 <= s_min < s_max):
        raise DomainError(f"Need 0 <= s_min < s_max, got [{s_min}, {s_max}].")
    if samples < 2:
        raise DomainError(f"Need at least two samples, got {samples}.")

    grid = np.linspace(s_min, s_max, samples)
    values = kernel.values(grid)
    if kernel.singular and not kernel.cap_at_one:
        keep = grid > 0
        grid, values = grid[keep], values[keep]

    finite = np.isfinite(values)
    range_ok = bool(np.all(finite) and np.all(values >= 0))
    if kernel.cap_at_one:
        range_ok = range_ok and bool(np.all(values <= 1.0))

    steps = np.diff(values)
    is_nonincreasing = bool(np.all(steps <= _MONOTONE_RTOL * (1.0 + np.abs(values[:-1]))))

    lower_bound_a = float(max(np.min(values[finite]), 0.0)) if np.any(finite) else 0.0

    tail = grid >= 1.0
    if np.count_nonzero(tail) >= 2:
        # linear decay on [1, inf) is exactly s * rho(s) nonincreasing
        moment = grid[tail] * values[tail]
        linear_decay_ok = bool(np.all(np.diff(moment) <= _MONOTONE_RTOL * (1.0 + np.abs(moment[:-1]))))
    else:
        linear_decay_ok = True

    region = grid[tail] if np.count_nonzero(tail) else grid[grid > 0]
    derivative_constant: Optional[float] = None
    if region.size:
        if kernel.derivative_available:
            slope = kernel.derivative_values(region)
        else:
            h = (s_max - s_min) / 1e6
            slope = _finite_difference(kernel, region, h)
        rho = kernel.values(region)
        positive = rho > 0
        ratios = region[positive] * np.abs(slope[positive]) / rho[positive]
        if ratios.size:
            derivative_constant = float(np.max(ratios))

    report = KernelReport(
        is_nonincreasing=is_nonincreasing,
        lower_bound_a=lower_bound_a,
        linear_decay_ok=linear_decay_ok,
        derivative_constant_C=derivative_constant,
        range_ok=range_ok,
    )
    logger.debug("kernel_check kind=%s report=%s", kernel.kind.value, report.to_dict())
    return report
