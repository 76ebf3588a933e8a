from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

from src.core.errors import DomainError

BIPARTITE_NOTE = "d=1: the two-vertex graph is bipartite, so no contraction factor is asserted."


def _check_a(a: float) -> None:
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"Lower bound a must lie in [0, 1], got {a}.")


def _check_d(d: int, minimum: int = 1) -> None:
    if int(d) != d or d < minimum:
        raise DomainError(f"d must be an integer >= {minimum}, got {d}.")


def _check_alpha_open(alpha: float) -> None:
    if not (0.0 < alpha < 2.0):
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}.")


def grad_decay_factor(a: float, d: int) -> float:
    """Per-step oscillation factor e^{-a(d-1)/d}; a = 0 gives 1."""
    _check_a(a)
    if d < 2:
        raise DomainError(BIPARTITE_NOTE)
    _check_d(d, 2)
    return math.exp(-a * (d - 1) / d)


def grad_decay_factor_pre_exponential(a: float, d: int) -> float:
    """(1 - a/d)^(d-1), the factor the exponential form dominates."""
    _check_a(a)
    if d < 2:
        raise DomainError(BIPARTITE_NOTE)
    _check_d(d, 2)
    return (1.0 - a / d) ** (d - 1)


def grad_decay_factor_conservative(a: float, d: int) -> float:
    """1 - a(d-1)/(2d), the rank-dependent and cluster-helper factor."""
    _check_a(a)
    if d < 2:
        raise DomainError(BIPARTITE_NOTE)
    _check_d(d, 2)
    return 1.0 - a * (d - 1) / (2.0 * d)


def consensus_distance_factor(a: float, d: int, t: float) -> float:
    """(2d/(d+1)) e^{-a t (d-1)/d}, bounding max_v |u(v,t) - A_u| / max_v |u(v,0) - A_u|."""
    return 2.0 * d / (d + 1.0) * grad_decay_factor(a, d) ** t


def variance_decay_rate(d: int, alpha: float) -> float:
    """c_{d,alpha}: Var^{alpha/2} falls at least this fast under rho >= s^-alpha."""
    _check_d(d)
    _check_alpha_open(alpha)
    numerator = alpha * (d + 1.0) ** ((4.0 - 3.0 * alpha) / 2.0)
    if alpha <= 1.0:
        return numerator / (2.0 * d ** (2.0 - alpha))
    return numerator / (2.0 * d)


def log_variance_rate(d: int) -> float:
    """Rate for alpha = 0: (log Var)' <= -(d+1)^2 / d^2 when rho >= 1."""
    _check_d(d)
    return (d + 1.0) ** 2 / d**2


def consensus_time_bound(var0: float, d: int, alpha: float) -> float:
    if var0 < 0:
        raise DomainError(f"var0 must be >= 0, got {var0}.")
    return var0 ** (alpha / 2.0) / variance_decay_rate(d, alpha)


def poincare_constant(d: int, alpha: float) -> float:
    """K in |u - A_u|_2^(2-alpha) <= K |grad u|^2_{2,rho} for rho >= s^-alpha."""
    _check_d(d)
    if not (0.0 <= alpha < 2.0):
        raise DomainError(f"alpha must lie in [0, 2), got {alpha}.")
    if alpha <= 1.0:
        return 2.0 * (d / (d + 1.0)) ** (2.0 - alpha)
    return 2.0 * d / (d + 1.0) ** (2.0 - alpha)


def poincare_pair_constant(d: int, alpha: float) -> float:
    """K' in |u - A_u|_2^(2-alpha) <= K' sum over ordered pairs of s^(2-alpha)."""
    _check_d(d)
    if not (0.0 <= alpha < 2.0):
        raise DomainError(f"alpha must lie in [0, 2), got {alpha}.")
    if alpha <= 1.0:
        return (d / (d + 1.0)) ** (2.0 - alpha) / d
    return 1.0 / (d + 1.0) ** (2.0 - alpha)


@dataclass(frozen=True)
class BoundSet:
    a: float
    d: int
    alpha: float
    var0: Optional[float]
    grad_factor_sharp: Optional[float]
    grad_factor_pre_exponential: Optional[float]
    grad_factor_conservative: Optional[float]
    c_d_alpha: float
    consensus_time: Optional[float]
    poincare_constant: float
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def format_table(self) -> str:
        rows = [(key, value) for key, value in self.to_dict().items()]
        width = max(len(key) for key, _ in rows)
        lines = []
        for key, value in rows:
            shown = "-" if value is None else (f"{value:.6f}" if isinstance(value, float) else str(value))
            lines.append(f"{key.ljust(width)}  {shown}")
        return "\n".join(lines)


def compute_bounds(a: float, d: int, alpha: float, var0: Optional[float] = None) -> BoundSet:
    _check_a(a)
    _check_d(d)
    c = variance_decay_rate(d, alpha)
    if d >= 2:
        sharp = grad_decay_factor(a, d)
        pre = grad_decay_factor_pre_exponential(a, d)
        conservative = grad_decay_factor_conservative(a, d)
        note = None
    else:
        sharp = pre = conservative = None
        note = BIPARTITE_NOTE
    return BoundSet(
        a=a,
        d=d,
        alpha=alpha,
        var0=var0,
        grad_factor_sharp=sharp,
        grad_factor_pre_exponential=pre,
        grad_factor_conservative=conservative,
        c_d_alpha=c,
        consensus_time=consensus_time_bound(var0, d, alpha) if var0 is not None else None,
        poincare_constant=poincare_constant(d, alpha),
        note=note,
    )
