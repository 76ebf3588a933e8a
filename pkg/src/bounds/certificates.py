from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.bounds.evaluators import (
    consensus_time_bound,
    log_variance_rate,
    poincare_constant,
    poincare_pair_constant,
    variance_decay_rate,
)
from src.core.config import settings
from src.core.errors import DomainError
from src.dynamics.model import InfluenceVariant, apply_L, effective_weights
from src.dynamics.trajectory import StopReason, Trajectory
from src.kernels.assumptions import check_kernel_assumptions
from src.kernels.kernel import Kernel, KernelKind, formal_sigma_inverse_square, sigma_supported, sigma_values
from src.state import (
    OpinionState,
    average,
    deviation_l2,
    entropy,
    grad_sup_norm,
    is_positive_scalar,
    max_deviation,
    power_sum,
    renyi_entropy,
    variance,
    weighted_energy,
)

logger = logging.getLogger(__name__)

RENYI_ORDERS: Tuple[float, ...] = (0.5, 2.0, 5.0)
THREE_CIRCLES_PAIRS = 10
THREE_CIRCLES_SEED = 0
RATE_SLACK = 1e-6
CONVEXITY_REL = 1e-6
FP_REL = 1e-12
IDENTITY_REL = 1e-10
CONSENSUS_TIME_SLACK = 1.01


class CertificateStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"


def _finite(x: Optional[float]) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


@dataclass
class CertificateEntry:
    name: str
    status: CertificateStatus
    measured: Optional[float] = None
    bound: Optional[float] = None
    margin: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "measured": _finite(self.measured),
            "bound": _finite(self.bound),
            "margin": _finite(self.margin),
            "tolerance": _finite(self.tolerance),
            "detail": self.detail,
        }


@dataclass
class CertificateReport:
    entries: List[CertificateEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(e.status == CertificateStatus.FAIL for e in self.entries)

    @property
    def failed(self) -> List[CertificateEntry]:
        return [e for e in self.entries if e.status == CertificateStatus.FAIL]

    def get(self, name: str) -> CertificateEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "entries": [e.to_dict() for e in self.entries]}

    def format_table(self) -> str:
        header = f"{'certificate':<36} {'status':<15} {'measured':>13} {'bound':>13} {'margin':>13}  detail"
        lines = [header, "-" * len(header)]
        for e in self.entries:
            cells = [("-" if v is None else f"{v:.6g}") for v in (e.measured, e.bound, e.margin)]
            lines.append(f"{e.name:<36} {e.status.value:<15} {cells[0]:>13} {cells[1]:>13} {cells[2]:>13}  {e.detail}")
        lines.append(f"\nresult: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _not_applicable(name: str, reason: str) -> CertificateEntry:
    return CertificateEntry(name=name, status=CertificateStatus.NOT_APPLICABLE, detail=reason)


def _compare(
    name: str,
    measured: Sequence[float],
    bound: Sequence[float],
    tolerance: Any,
    detail: str = "",
) -> CertificateEntry:
    """measured <= bound + tolerance at every index; reports the tightest index."""
    m = np.atleast_1d(np.asarray(measured, dtype=float))
    if m.size == 0:
        return _not_applicable(name, "no samples in the checked window")
    b = np.broadcast_to(np.asarray(bound, dtype=float), m.shape)
    tol = np.broadcast_to(np.asarray(tolerance, dtype=float), m.shape)
    slack = b - m + tol
    bad = np.isnan(slack)
    i = int(np.argmax(bad)) if bad.any() else int(np.argmin(slack))
    ok = not bad.any() and slack[i] >= 0
    note = f"{detail}; worst at index {i}" if detail else f"worst at index {i}"
    return CertificateEntry(
        name=name,
        status=CertificateStatus.PASS if ok else CertificateStatus.FAIL,
        measured=float(m[i]),
        bound=float(b[i]),
        margin=float(b[i] - m[i]),
        tolerance=float(tol[i]),
        detail=note,
    )


def _power_weight(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda s: np.power(s, -alpha)


def _ordered_pair_distances(state: OpinionState) -> np.ndarray:
    u = state.values
    dist = np.linalg.norm(u[None, :, :] - u[:, None, :], axis=-1)
    return dist[~np.eye(state.vertex_count, dtype=bool)]


def _dominates_pure_power(kernel: Kernel, alpha: float, c: float) -> bool:
    # rho >= s^-alpha for every s > 0
    if kernel.kind == KernelKind.CONSTANT:
        level = min(kernel.p, 1.0) if kernel.cap_at_one else kernel.p
        return alpha == 0 and level >= 1.0
    if kernel.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER) and not kernel.cap_at_one:
        return kernel.alpha == alpha and kernel.coefficient >= 1.0 and c >= 1.0
    return False


def check_poincare(
    state: OpinionState,
    alpha: float,
    c: float = 1.0,
    kernel: Optional[Kernel] = None,
) -> CertificateEntry:
    """
    |u - A_u|_2^(2-alpha) against the rho-energy.

    Without a kernel, or with one bounded below by s^-alpha, the two-branch
    constant applies to rho = s^-alpha. Other kernels with rho >= c s^-alpha on
    s >= 1 get the summed form K' sum_pairs [s^2 rho / c + (s^2 rho / c)^((2 - alpha)/2)].
    """
    name = "poincare"
    if not (0.0 <= alpha < 2.0):
        raise DomainError(f"alpha must lie in [0, 2), got {alpha}.")
    if c <= 0:
        raise DomainError(f"c must be > 0, got {c}.")
    if state.n != 1:
        return _not_applicable(name, f"needs a scalar state, got n={state.n}")

    lhs = deviation_l2(state) ** (2.0 - alpha)
    if kernel is None or _dominates_pure_power(kernel, alpha, c):
        rho = _power_weight(alpha) if kernel is None else kernel.values
        rhs = poincare_constant(state.d, alpha) * weighted_energy(state, rho)
        form = "pure_power"
    else:
        s = _ordered_pair_distances(state)
        s = s[s > 0]
        x = s * s * kernel.values(s) / c
        rhs = poincare_pair_constant(state.d, alpha) * float(np.sum(x + np.power(x, (2.0 - alpha) / 2.0)))
        form = "summed"
    tol = FP_REL * (1.0 + lhs + rhs)
    return _compare(name, [lhs], [rhs], tol, f"{form} alpha={alpha:g} c={c:g}")


def check_three_circles(times: Sequence[float], I_values: Sequence[float], r: float, s: float) -> CertificateEntry:
    """
    I(r) <= ((s - r)/s) I(0) + (r/s) I(s) and I(0) - I(s) <= (s/r)(I(0) - I(r)),
    with I linearly interpolated between samples and tolerance 1e-6 I(0).
    """
    name = "three_circles_interpolation"
    t = np.asarray(times, dtype=float)
    values = np.asarray(I_values, dtype=float)
    if not (0 < r < s):
        raise DomainError(f"Need 0 < r < s, got r={r}, s={s}.")
    if s > t[-1]:
        raise DomainError(f"s={s} lies beyond the last sample time {t[-1]}.")
    i0 = float(np.interp(0.0, t, values))
    ir = float(np.interp(r, t, values))
    i_s = float(np.interp(s, t, values))
    tol = CONVEXITY_REL * abs(i0)
    chord = (s - r) / s * i0 + r / s * i_s
    first = _compare(name, [ir], [chord], tol, f"r={r:.6g} s={s:.6g} chord")
    second = _compare(name, [i0 - i_s], [s / r * (i0 - ir)], tol * s / r, f"r={r:.6g} s={s:.6g} drop")
    return _worst([first, second])


def _worst(entries: Sequence[CertificateEntry]) -> CertificateEntry:
    failed = [e for e in entries if e.status == CertificateStatus.FAIL]
    if failed:
        return failed[0]
    return min(entries, key=lambda e: (e.margin or 0.0) + (e.tolerance or 0.0))


class _View:
    """Per-sample quantities shared by the certificates."""

    def __init__(self, trajectory: Trajectory) -> None:
        self.trajectory = trajectory
        self.model = trajectory.model
        self.kernel = trajectory.model.kernel
        self.states = trajectory.states
        self.times = np.asarray(trajectory.times, dtype=float)
        self.steps = np.diff(self.times)
        first = self.states[0]
        self.d = first.d
        self.n = first.n
        self.size = first.vertex_count
        self.discrete = trajectory.is_discrete
        self.tol = float(trajectory.integrator_meta.get("tol", settings.default_tol))
        self.fd = settings.fd_tol_multiplier
        self.osc = np.array([grad_sup_norm(s) for s in self.states])
        self.var = np.array([variance(s) for s in self.states])
        self.avg = np.array([average(s) for s in self.states])
        self.scale = np.array([float(np.max(np.abs(s.values))) for s in self.states])
        self.osc0 = float(self.osc[0])
        self.adjacent = bool(np.all(self.steps == 1)) if self.discrete else trajectory.stride == 1
        self.has_midpoints = len(trajectory.midpoints) == len(self.states) - 1 and len(self.states) > 1
        self.positive_scalar = all(is_positive_scalar(s) for s in self.states)
        self.symmetric = self.model.symmetric
        self._L: Dict[int, np.ndarray] = {}
        self._Lmid: Dict[int, np.ndarray] = {}

    @property
    def alpha(self) -> Optional[float]:
        return self.model.power_alpha

    @property
    def uncapped_power(self) -> bool:
        return self.kernel.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER) and not self.kernel.cap_at_one

    def L(self, i: int) -> np.ndarray:
        if i not in self._L:
            self._L[i] = apply_L(self.states[i], self.model)
        return self._L[i]

    def L_mid(self, i: int) -> np.ndarray:
        if i not in self._Lmid:
            self._Lmid[i] = apply_L(self.trajectory.midpoints[i], self.model)
        return self._Lmid[i]

    def continuous_allowance(self, sens: np.ndarray) -> np.ndarray:
        """Error budget per step for a quantity with the given sensitivity."""
        steps = self.steps[: len(sens)]
        if self.discrete:
            return np.zeros(len(steps))
        return self.fd * self.tol * steps * np.sqrt(self.size * self.n) * sens

    def pre_merge_count(self) -> int:
        """Number of samples up to and including the first merge after t = 0."""
        cutoff = self.trajectory.first_merge_time()
        if cutoff is None:
            return len(self.states)
        return int(np.searchsorted(self.times, cutoff, side="right"))

    def regular_steps(self) -> List[int]:
        """Steps before the first merge that do not cross a kernel breakpoint."""
        cutoff = self.trajectory.first_merge_time()
        breakpoints = np.asarray(self.kernel.breakpoints, dtype=float)
        picked = []
        for i in range(len(self.steps)):
            if cutoff is not None and self.times[i + 1] > cutoff:
                break
            if breakpoints.size and self._crosses(i, breakpoints):
                continue
            picked.append(i)
        return picked

    def _crosses(self, i: int, breakpoints: np.ndarray) -> bool:
        snaps = [self.states[i], self.trajectory.midpoints[i], self.states[i + 1]]
        sides = [np.sign(_ordered_pair_distances(s)[:, None] - breakpoints[None, :]) for s in snaps]
        return bool(np.any(sides[0] != sides[1]) or np.any(sides[1] != sides[2]))


def _simpson(h: float, left: float, mid: float, right: float) -> float:
    return h / 6.0 * (left + 4.0 * mid + right)


def _identity_over_steps(
    view: _View,
    name: str,
    quantity: Callable[[OpinionState], float],
    rate: Callable[[OpinionState, np.ndarray], float],
    sensitivity: Callable[[OpinionState, np.ndarray], float],
    detail: str,
) -> CertificateEntry:
    """Q(t_{i+1}) - Q(t_i) against the Simpson integral of dQ/dt over the step."""
    steps = view.regular_steps()
    if not steps:
        return _not_applicable(name, "no regular steps before the first merge")
    measured, bound, tol = [], [], []
    for i in steps:
        h = float(view.steps[i])
        mid = view.trajectory.midpoints[i]
        q0, q1 = quantity(view.states[i]), quantity(view.states[i + 1])
        integral = _simpson(
            h,
            rate(view.states[i], view.L(i)),
            rate(mid, view.L_mid(i)),
            rate(view.states[i + 1], view.L(i + 1)),
        )
        sens = max(
            sensitivity(view.states[i], view.L(i)),
            sensitivity(mid, view.L_mid(i)),
            sensitivity(view.states[i + 1], view.L(i + 1)),
        )
        budget = view.fd * view.tol * (abs(integral) + h * sens * math.sqrt(view.size * view.n))
        measured.append(abs((q1 - q0) - integral))
        bound.append(0.0)
        tol.append(budget + FP_REL * (abs(q0) + abs(q1)))
    return _compare(name, measured, bound, tol, detail)


# Individual certificates. Each returns exactly one entry.


def _average_conservation(view: _View) -> CertificateEntry:
    name = "average_conservation"
    if not view.symmetric:
        return _not_applicable(name, f"weights are not symmetric (variant={view.model.variant.value})")
    drift = np.linalg.norm(np.diff(view.avg, axis=0), axis=1)
    tol = FP_REL * (1.0 + np.linalg.norm(view.avg[:-1], axis=1) + view.osc[:-1])
    return _compare(name, drift, 0.0, tol)


def _max_min_monotone(view: _View) -> CertificateEntry:
    name = "max_min_monotone"
    highs = np.array([s.values.max(axis=0) for s in view.states])
    lows = np.array([s.values.min(axis=0) for s in view.states])
    rise = np.max(np.diff(highs, axis=0), axis=1)
    fall = np.max(-np.diff(lows, axis=0), axis=1)
    measured = np.maximum(rise, fall)
    tol = FP_REL * (1.0 + view.scale[:-1]) + view.continuous_allowance(np.ones(len(view.steps)))
    return _compare(name, measured, 0.0, tol)


def _oscillation_monotone(view: _View) -> CertificateEntry:
    name = "oscillation_monotone"
    tol = FP_REL * (1.0 + view.osc[:-1]) + view.continuous_allowance(2.0 * np.ones(len(view.steps)))
    return _compare(name, view.osc[1:], view.osc[:-1], tol)


def _discrete_weights(view: _View) -> List[np.ndarray]:
    return [effective_weights(s, view.model) for s in view.states[:-1]]


def _offdiag(weights: np.ndarray) -> np.ndarray:
    return weights[~np.eye(weights.shape[0], dtype=bool)]


def _gradient_contraction_sharp(view: _View) -> List[CertificateEntry]:
    names = ("gradient_contraction_sharp", "consensus_distance")
    reason = None
    if not view.discrete:
        reason = "discrete trajectories only"
    elif view.d < 2:
        reason = "d=1: the two-vertex graph is bipartite"
    elif not view.adjacent:
        reason = "needs every step (stride 1) to measure the weight lower bound"
    if reason:
        return [_not_applicable(n, reason) for n in names]
    weights = np.concatenate([_offdiag(w) for w in _discrete_weights(view)])
    if weights.max() > 1.0 + FP_REL:
        return [_not_applicable(n, f"weights exceed 1 (max mu={weights.max():.6g})") for n in names]
    a = float(np.clip(weights.min(), 0.0, 1.0))
    factor = math.exp(-a * (view.d - 1) / view.d)
    t = view.times
    slack = settings.cert_slack * max(view.osc0, 1e-300)
    sharp = _compare(names[0], view.osc, view.osc0 * factor**t, slack, f"a={a:.6g}")
    dev = np.array([max_deviation(s) for s in view.states])
    spread = 2.0 * view.d / (view.d + 1.0) * factor**t * dev[0]
    distance = _compare(names[1], dev, spread, settings.cert_slack * max(dev[0], 1e-300), f"a={a:.6g}")
    return [sharp, distance]


def _gradient_contraction_rank(view: _View) -> CertificateEntry:
    name = "gradient_contraction_rank"
    if view.model.variant != InfluenceVariant.RANK_DEPENDENT:
        return _not_applicable(name, "rank-dependent models only")
    if not view.discrete:
        return _not_applicable(name, "discrete trajectories only")
    if view.d < 2:
        return _not_applicable(name, "d=1: the two-vertex graph is bipartite")
    if view.model.rank_kernel.func is not None:
        return _not_applicable(name, "custom rank kernels have no monotone lower bound")
    first = view.states[0]
    top = float(np.max(np.linalg.norm(first.values, axis=1)))
    a = float(np.clip(view.model.rank_kernel.values(top, view.osc0), 0.0, 1.0))
    factor = 1.0 - a * (view.d - 1) / (2.0 * view.d)
    slack = settings.cert_slack * max(view.osc0, 1e-300)
    return _compare(name, view.osc, view.osc0 * factor**view.times, slack, f"a={a:.6g}")


def _speed_and_drift(view: _View) -> List[CertificateEntry]:
    names = ("speed_bound", "oscillation_drift")
    reason = None
    if not view.discrete:
        reason = "discrete trajectories only"
    elif not view.adjacent:
        reason = "needs every step (stride 1)"
    elif view.model.variant == InfluenceVariant.RANK_DEPENDENT:
        reason = "speed bound is stated for distance-only kernels"
    elif not view.kernel.bounded_by_one:
        reason = "kernel is not bounded by one"
    if reason is None:
        report = check_kernel_assumptions(
            view.kernel, 0.0, max(2.0, view.osc0), settings.kernel_check_samples
        )
        if not report.linear_decay_ok:
            reason = "kernel fails linear decay on [1, osc0]"
    if reason:
        return [_not_applicable(n, reason) for n in names]
    speed = np.array(
        [np.max(np.linalg.norm(b.values - a.values, axis=1)) for a, b in zip(view.states, view.states[1:])]
    )
    tol = FP_REL * (1.0 + view.scale[:-1])
    return [
        _compare(names[0], speed, 1.0, tol),
        _compare(names[1], view.osc[:-1] - 2.0, view.osc[1:], tol),
    ]


def _discrete_variance(view: _View) -> List[CertificateEntry]:
    names = ("variance_identity", "variance_decrease")
    reason = None
    if not view.discrete:
        reason = "discrete trajectories only"
    elif not view.adjacent:
        reason = "needs every step (stride 1)"
    elif not view.symmetric:
        reason = "identity needs mu = rho (standard variant)"
    if reason:
        return [_not_applicable(n, reason) for n in names]
    lhs, rhs, decrease_bound, scale = [], [], [], []
    for i, state in enumerate(view.states[:-1]):
        energy = weighted_energy(state, view.kernel.values)
        lu = view.L(i)
        lu_sq = float(np.sum(lu**2))
        dist = _ordered_pair_distances(state)
        weights = _offdiag(effective_weights(state, view.model))
        occurring = weights[dist > 0]
        max_rho = float(occurring.max()) if occurring.size else 0.0
        lhs.append((view.d + 1) * (view.var[i + 1] - view.var[i]))
        rhs.append(-2.0 * energy + lu_sq)
        decrease_bound.append(2.0 * (max_rho - 1.0) * energy)
        scale.append((view.d + 1) * view.var[i] + 2.0 * energy + lu_sq)
    lhs_a, rhs_a, scale_a = np.array(lhs), np.array(rhs), np.array(scale)
    tol = IDENTITY_REL * scale_a + 1e-300
    return [
        _compare(names[0], np.abs(lhs_a - rhs_a), 0.0, tol),
        _compare(names[1], lhs_a, np.array(decrease_bound), tol),
    ]


def _variance_decay_discrete(view: _View) -> CertificateEntry:
    name = "variance_decay_discrete"
    alpha = view.alpha
    if not view.discrete or not view.adjacent:
        return _not_applicable(name, "discrete trajectories with every step only")
    if not view.symmetric:
        return _not_applicable(name, "standard variant only")
    if alpha is None or not (0.0 < alpha < 2.0):
        return _not_applicable(name, "needs rho >= c s^-alpha on s >= 1 with alpha in (0, 2)")
    occurring = []
    for state, weights in zip(view.states[:-1], _discrete_weights(view)):
        dist = _ordered_pair_distances(state)
        occurring.append(_offdiag(weights)[dist > 0])
    values = np.concatenate(occurring) if occurring else np.array([])
    rho0 = float(values.max()) if values.size else 0.0
    if rho0 >= 1.0:
        return _not_applicable(name, f"needs rho <= rho0 < 1 on occurring distances, max rho={rho0:.6g}")
    floor = 1e-8 * (1.0 + view.osc0)
    drops = []
    for i in range(len(view.steps)):
        if view.osc[i + 1] <= floor:
            break
        if view.var[i] >= 1.0:
            drops.append(view.var[i] ** (alpha / 2.0) - view.var[i + 1] ** (alpha / 2.0))
        else:
            drops.append(math.log(view.var[i]) - math.log(view.var[i + 1]))
    if not drops:
        return _not_applicable(name, "no steps above the consensus floor")
    worst = float(min(drops))
    status = CertificateStatus.PASS if worst > 0 else CertificateStatus.FAIL
    return CertificateEntry(
        name=name,
        status=status,
        measured=worst,
        bound=0.0,
        margin=worst,
        tolerance=0.0,
        detail=f"minimum per-step drop, rho0={rho0:.6g}",
    )


def _entropies(view: _View) -> List[CertificateEntry]:
    names = ("entropy_monotone", "renyi_monotone")
    if not view.positive_scalar:
        return [_not_applicable(n, "needs a positive scalar state") for n in names]
    if not view.symmetric:
        return [_not_applicable(n, "needs symmetric weights") for n in names]
    s_vals = np.array([entropy(s) for s in view.states])
    s_sens = np.array([float(np.sum(np.abs(1.0 + np.log(s.values)))) for s in view.states[1:]])
    s_tol = FP_REL * (1.0 + np.abs(s_vals[:-1])) + view.continuous_allowance(s_sens)
    entries = [_compare(names[0], s_vals[:-1], s_vals[1:], s_tol)]

    measured, bound, tol = [], [], []
    for order in RENYI_ORDERS:
        r_vals = np.array([renyi_entropy(s, order) for s in view.states])
        sens = np.array(
            [
                abs(order / (1.0 - order)) * float(np.sum(s.values ** (order - 1.0))) / power_sum(s, order)
                for s in view.states[1:]
            ]
        )
        measured.extend(r_vals[:-1])
        bound.extend(r_vals[1:])
        tol.extend(FP_REL * (1.0 + np.abs(r_vals[:-1])) + view.continuous_allowance(sens))
    entries.append(_compare(names[1], measured, bound, tol, f"orders={list(RENYI_ORDERS)}"))
    return entries


def _entropy_rates(view: _View) -> List[CertificateEntry]:
    names = ("entropy_derivative_sign", "renyi_derivative_sign")
    reason = None
    if view.discrete:
        reason = "continuous trajectories only"
    elif not view.positive_scalar:
        reason = "needs a positive scalar state"
    elif not view.symmetric:
        reason = "needs symmetric weights"
    if reason:
        return [_not_applicable(n, reason) for n in names]
    lower, rate, tol = [], [], []
    r_measured = []
    for state in view.states:
        u = state.values[:, 0]
        du = u[None, :] - u[:, None]
        dist = np.abs(du)
        rho = np.zeros_like(dist)
        mask = dist > 0
        rho[mask] = view.kernel.values(dist[mask])
        ratio = np.log(u[None, :] / u[:, None])
        s_prime = float(np.sum(ratio * du * rho)) / (2.0 * view.d)
        bound_low = float(np.sum(du**2 * rho / np.maximum(u[None, :], u[:, None]))) / (2.0 * view.d)
        lower.append(bound_low)
        rate.append(s_prime)
        tol.append(FP_REL * (1.0 + abs(s_prime)))
        for order in RENYI_ORDERS:
            powered = u ** (order - 1.0)
            d_sum = -order / (2.0 * view.d) * float(np.sum((powered[None, :] - powered[:, None]) * du * rho))
            # (1 - order) R' has the sign of d_sum / sum u^order; R is nondecreasing
            r_measured.append(-d_sum / (1.0 - order) / float(np.sum(u**order)))
    return [
        _compare(names[0], lower, rate, tol, "S' >= (1/2d) sum (du)^2 rho / max(u) >= 0"),
        _compare(names[1], r_measured, 0.0, FP_REL, f"orders={list(RENYI_ORDERS)}"),
    ]


def _needs_continuous_identity(view: _View) -> Optional[str]:
    if view.discrete:
        return "continuous trajectories only"
    if not view.has_midpoints:
        return "needs stride 1 with step midpoints"
    if not view.symmetric:
        return "needs mu = rho (standard variant)"
    return None


def _energy_identity_continuous(view: _View) -> CertificateEntry:
    name = "energy_identity_continuous"
    reason = _needs_continuous_identity(view)
    if reason:
        return _not_applicable(name, reason)
    rho = view.kernel.values
    return _identity_over_steps(
        view,
        name,
        quantity=lambda s: deviation_l2(s) ** 2,
        rate=lambda s, lu: -2.0 * weighted_energy(s, rho),
        sensitivity=lambda s, lu: 2.0 * deviation_l2(s),
        detail="d/dt |u - A|^2 = -2 |grad u|^2_rho",
    )


def _sigma_energy_identity(view: _View) -> CertificateEntry:
    name = "sigma_energy_identity"
    reason = _needs_continuous_identity(view)
    if reason:
        return _not_applicable(name, reason)
    kernel = view.kernel
    if not sigma_supported(kernel):
        return _not_applicable(name, "sigma integral diverges for this kernel")
    if kernel.kind == KernelKind.CUSTOM:
        return _not_applicable(name, "no closed-form sigma for custom kernels")
    sigma = lambda s: sigma_values(kernel, s)  # noqa: E731
    return _identity_over_steps(
        view,
        name,
        quantity=lambda s: weighted_energy(s, sigma),
        rate=lambda s, lu: -2.0 * float(np.sum(lu**2)),
        sensitivity=lambda s, lu: 2.0 * float(np.linalg.norm(lu)),
        detail="d/dt |grad u|^2_sigma = -2 |u_t|^2",
    )


def _power_energy_identity(view: _View) -> CertificateEntry:
    name = "power_energy_identity"
    reason = _needs_continuous_identity(view)
    if reason:
        return _not_applicable(name, reason)
    alpha = view.alpha
    if not view.uncapped_power or alpha is None or alpha == 2.0:
        return _not_applicable(name, "needs rho = c s^-alpha uncapped with alpha != 2")
    rho = view.kernel.values
    return _identity_over_steps(
        view,
        name,
        quantity=lambda s: weighted_energy(s, rho),
        rate=lambda s, lu: (alpha - 2.0) * float(np.sum(lu**2)),
        sensitivity=lambda s, lu: abs(2.0 - alpha) * float(np.linalg.norm(lu)),
        detail=f"d/dt |grad u|^2_rho = (alpha - 2) |u_t|^2, alpha={alpha:g}",
    )


def _log_energy_identity(view: _View) -> CertificateEntry:
    name = "log_energy_identity"
    reason = _needs_continuous_identity(view)
    if reason:
        return _not_applicable(name, reason)
    if not view.uncapped_power or view.alpha != 2.0:
        return _not_applicable(name, "needs rho = c s^-2 uncapped")
    coef = view.kernel.coefficient
    weight = lambda s: coef * formal_sigma_inverse_square(s)  # noqa: E731
    return _identity_over_steps(
        view,
        name,
        quantity=lambda s: weighted_energy(s, weight),
        rate=lambda s, lu: -2.0 * float(np.sum(lu**2)),
        sensitivity=lambda s, lu: 2.0 * float(np.linalg.norm(lu)),
        detail="formal sigma = 2 s^-2 log s",
    )


def _energy_nondecreasing_steep_power(view: _View) -> CertificateEntry:
    name = "energy_nondecreasing_steep_power"
    if view.discrete:
        return _not_applicable(name, "continuous trajectories only")
    if not view.symmetric:
        return _not_applicable(name, "standard variant only")
    alpha = view.alpha
    if not view.uncapped_power or alpha is None or alpha <= 2.0:
        return _not_applicable(name, "needs rho = c s^-alpha uncapped with alpha > 2")
    last = view.pre_merge_count()
    energies = np.array([weighted_energy(s, view.kernel.values) for s in view.states[:last]])
    if energies.size < 2:
        return _not_applicable(name, "fewer than two samples before the first merge")
    sens = np.array(
        [abs(2.0 - alpha) * float(np.linalg.norm(view.L(i + 1))) for i in range(energies.size - 1)]
    )
    tol = FP_REL * (1.0 + np.abs(energies[:-1])) + view.continuous_allowance(sens)
    return _compare(name, energies[:-1], energies[1:], tol, f"alpha={alpha:g}")


def _rate_hypothesis(view: _View) -> Optional[str]:
    """None when rho >= s^-alpha everywhere on a scalar state with alpha in (0, 2)."""
    if view.discrete:
        return "continuous trajectories only"
    if not view.symmetric:
        return "standard variant only"
    if view.n != 1:
        return f"needs a scalar state, got n={view.n}"
    alpha = view.alpha
    if not view.uncapped_power or alpha is None or not (0.0 < alpha < 2.0):
        return "needs rho >= s^-alpha (uncapped power kernel) with alpha in (0, 2)"
    if view.kernel.coefficient < 1.0:
        return f"needs coefficient c >= 1, got {view.kernel.coefficient:g}"
    return None


@dataclass
class _Curve:
    """Var and I = Var^(alpha/2) on the samples before the first merge."""

    times: np.ndarray
    steps: np.ndarray
    var: np.ndarray
    I: np.ndarray
    err_I: np.ndarray
    err_var: np.ndarray


def _curve(view: _View, alpha: float) -> _Curve:
    k = view.pre_merge_count()
    var = view.var[:k]
    lo = np.maximum(np.minimum(var[:-1], var[1:]), 1e-300)
    hi = np.maximum(var[:-1], var[1:])
    # propagated error of the secant slopes
    scale = np.maximum(lo ** ((alpha - 1.0) / 2.0), hi ** ((alpha - 1.0) / 2.0))
    budget = view.fd * view.tol * math.sqrt(view.n)
    return _Curve(
        times=view.times[:k],
        steps=view.steps[: k - 1],
        var=var,
        I=var ** (alpha / 2.0),
        err_I=budget * alpha * scale,
        err_var=budget * 2.0 * np.sqrt(hi),
    )


def _variance_rate(view: _View) -> CertificateEntry:
    name = "variance_rate"
    reason = _rate_hypothesis(view)
    if reason:
        return _not_applicable(name, reason)
    alpha = view.alpha
    c = variance_decay_rate(view.d, alpha)
    curve = _curve(view, alpha)
    if curve.steps.size == 0:
        return _not_applicable(name, "fewer than two samples before the first merge")
    slopes = np.diff(curve.I) / curve.steps
    return _compare(name, slopes, -c, RATE_SLACK + curve.err_I, f"c_d_alpha={c:.6g}")


def _log_variance_rate(view: _View) -> CertificateEntry:
    name = "log_variance_rate"
    if view.discrete:
        return _not_applicable(name, "continuous trajectories only")
    if not view.symmetric:
        return _not_applicable(name, "standard variant only")
    kernel = view.kernel
    level_one = (
        kernel.kind == KernelKind.CONSTANT and (min(kernel.p, 1.0) if kernel.cap_at_one else kernel.p) >= 1.0
    ) or (view.uncapped_power and kernel.alpha == 0.0 and kernel.coefficient >= 1.0)
    if not level_one:
        return _not_applicable(name, "needs rho >= 1 everywhere")
    keep = view.var > 0
    upto = len(view.var) if keep.all() else int(np.argmin(keep))
    if upto < 2:
        return _not_applicable(name, "variance vanishes")
    log_var = np.log(view.var[:upto])
    slopes = np.diff(log_var) / view.steps[: upto - 1]
    err = view.fd * view.tol * 2.0 * math.sqrt(view.n) / np.sqrt(view.var[1:upto])
    rate = log_variance_rate(view.d)
    return _compare(name, slopes, -rate, RATE_SLACK + err, f"rate={rate:.6g}")


def _consensus_time(view: _View) -> CertificateEntry:
    name = "consensus_time"
    reason = _rate_hypothesis(view)
    if reason:
        return _not_applicable(name, reason)
    alpha = view.alpha
    limit = consensus_time_bound(view.var[0], view.d, alpha) * CONSENSUS_TIME_SLACK
    meta = view.trajectory.integrator_meta
    stop = view.trajectory.stop_reason
    last = float(view.times[-1])
    if stop == StopReason.CONSENSUS:
        reached = float(meta.get("consensus_time", last))
        return _compare(name, [reached], [limit], 0.0, "consensus reached")
    if stop in (StopReason.COMPLETED, StopReason.STEP_LIMIT) and last < limit:
        c = variance_decay_rate(view.d, alpha)
        curve = _curve(view, alpha)
        t = curve.times
        budget = RATE_SLACK * t + view.fd * view.tol * math.sqrt(view.n) * (1.0 + t)
        return _compare(name, curve.I, curve.I[0] - c * t, budget, "run ended before the bound; integrated decay checked")
    return CertificateEntry(
        name=name,
        status=CertificateStatus.FAIL,
        measured=last,
        bound=limit,
        margin=limit - last,
        tolerance=0.0,
        detail=f"no consensus by t={last:.6g} (stop={stop.value})",
    )


def _three_circles_hypothesis(view: _View) -> Optional[str]:
    if view.discrete:
        return "continuous trajectories only"
    if not view.symmetric:
        return "standard variant only"
    alpha = view.alpha
    if not view.uncapped_power or alpha is None or not (0.0 < alpha < 2.0):
        return "needs rho = c s^-alpha uncapped with alpha in (0, 2)"
    if view.pre_merge_count() < 3:
        return "fewer than three samples before the first merge"
    return None


def _three_circles(view: _View) -> CertificateEntry:
    name = "three_circles"
    reason = _three_circles_hypothesis(view)
    if reason:
        return _not_applicable(name, reason)
    curve = _curve(view, view.alpha)
    h = curve.steps
    measured, bound, tol = [], [], []
    for series, err in ((curve.I, curve.err_I), (curve.var, curve.err_var)):
        floor = CONVEXITY_REL * series[0]
        slopes = np.diff(series) / h
        # nonincreasing
        measured.extend(series[1:])
        bound.extend(series[:-1])
        tol.extend(floor + err * h)
        # h_i (slope_i - slope_{i-1}) >= -floor
        second = h[1:] * (slopes[1:] - slopes[:-1])
        measured.extend(-second)
        bound.extend(np.zeros_like(second))
        tol.extend(floor + h[1:] * (err[1:] + err[:-1]))
    return _compare(name, measured, bound, tol, "I = Var^(alpha/2) and Var nonincreasing and convex")


def _three_circles_interpolation(view: _View) -> CertificateEntry:
    name = "three_circles_interpolation"
    reason = _three_circles_hypothesis(view)
    if reason:
        return _not_applicable(name, reason)
    curve = _curve(view, view.alpha)
    rng = np.random.default_rng(THREE_CIRCLES_SEED)
    t_last = float(curve.times[-1])
    entries = []
    for _ in range(THREE_CIRCLES_PAIRS):
        r, s = sorted(rng.uniform(0.0, t_last, size=2))
        if not (0 < r < s):
            continue
        for series in (curve.I, curve.var):
            entries.append(check_three_circles(curve.times, series, float(r), float(s)))
    if not entries:
        return _not_applicable(name, "no valid (r, s) pairs")
    return _worst(entries)


def _nonlinear_frequency(view: _View) -> CertificateEntry:
    name = "nonlinear_frequency"
    reason = _rate_hypothesis(view) or _three_circles_hypothesis(view)
    if reason:
        return _not_applicable(name, reason)
    alpha = view.alpha
    c = variance_decay_rate(view.d, alpha)
    curve = _curve(view, alpha)
    h = curve.steps
    slopes = np.diff(curve.I) / h
    # three-point derivative at interior samples, a weighted mean of the adjacent secants
    U = (h[1:] * slopes[:-1] + h[:-1] * slopes[1:]) / (h[:-1] + h[1:])
    U_err = np.maximum(curve.err_I[:-1], curve.err_I[1:])
    measured = list(U) + list(U[:-1])
    bound = [-c] * len(U) + list(U[1:])
    tol = list(RATE_SLACK + U_err) + list(CONVEXITY_REL * curve.I[0] / h[1:-1] + U_err[:-1] + U_err[1:])
    return _compare(name, measured, bound, tol, f"U <= -c_d_alpha={-c:.6g} and U nondecreasing")


def _differential_inequality(view: _View) -> CertificateEntry:
    name = "differential_inequality"
    reason = _needs_continuous_identity(view)
    if reason:
        return _not_applicable(name, reason)
    kernel = view.kernel
    if kernel.kind == KernelKind.CONSTANT:
        alpha = 0.0
    elif view.uncapped_power and view.alpha is not None and view.alpha < 2.0:
        alpha = view.alpha
    else:
        return _not_applicable(name, "needs rho = c s^-alpha uncapped with alpha in [0, 2) or constant rho")
    rho = kernel.values
    steps = view.regular_steps()
    if not steps:
        return _not_applicable(name, "no regular steps before the first merge")

    def rhs(state: OpinionState) -> float:
        f = deviation_l2(state) ** 2
        if f == 0:
            return 0.0
        g = weighted_energy(state, rho)
        return -(2.0 - alpha) * g * g / f

    measured, bound, tol = [], [], []
    for i in steps:
        h = float(view.steps[i])
        mid = view.trajectory.midpoints[i]
        g0 = weighted_energy(view.states[i], rho)
        g1 = weighted_energy(view.states[i + 1], rho)
        integral = _simpson(h, rhs(view.states[i]), rhs(mid), rhs(view.states[i + 1]))
        sens = (2.0 - alpha) * max(
            float(np.linalg.norm(view.L(i))), float(np.linalg.norm(view.L_mid(i))), float(np.linalg.norm(view.L(i + 1)))
        )
        budget = view.fd * view.tol * (abs(integral) + h * sens * math.sqrt(view.size * view.n))
        measured.append(g1 - g0)
        bound.append(integral)
        tol.append(budget + FP_REL * (abs(g0) + abs(g1)))
    return _compare(name, measured, bound, tol, f"g_t <= -(2 - alpha) g^2 / f, alpha={alpha:g}")


def _poincare_form(kernel: Kernel) -> Optional[Tuple[float, float]]:
    """(alpha, c) with rho >= c s^-alpha on s >= 1, or None."""
    kind = kernel.kind
    if kind == KernelKind.CONSTANT:
        level = min(kernel.p, 1.0) if kernel.cap_at_one else kernel.p
        return (0.0, min(level, 1.0)) if level > 0 else None
    if kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER) and 0.0 <= kernel.alpha < 2.0:
        c = kernel.coefficient
        # min(1, c s^-alpha) >= min(c, 1) s^-alpha on s >= 1
        return kernel.alpha, min(c, 1.0) if kernel.cap_at_one else c
    return None


def _poincare(view: _View) -> CertificateEntry:
    name = "poincare"
    if view.n != 1:
        return _not_applicable(name, f"needs a scalar state, got n={view.n}")
    form = _poincare_form(view.kernel)
    if form is None:
        return _not_applicable(name, "kernel has no lower bound of the form c s^-alpha")
    alpha, c = form
    worst = _worst([check_poincare(s, alpha, c, view.kernel) for s in view.states])
    worst.detail = f"{worst.detail}; {len(view.states)} samples"
    return worst


CERTIFICATE_NAMES: Tuple[str, ...] = (
    "average_conservation",
    "max_min_monotone",
    "oscillation_monotone",
    "gradient_contraction_sharp",
    "consensus_distance",
    "gradient_contraction_rank",
    "speed_bound",
    "oscillation_drift",
    "variance_identity",
    "variance_decrease",
    "variance_decay_discrete",
    "entropy_monotone",
    "renyi_monotone",
    "entropy_derivative_sign",
    "renyi_derivative_sign",
    "energy_identity_continuous",
    "sigma_energy_identity",
    "power_energy_identity",
    "log_energy_identity",
    "energy_nondecreasing_steep_power",
    "variance_rate",
    "log_variance_rate",
    "consensus_time",
    "three_circles",
    "three_circles_interpolation",
    "nonlinear_frequency",
    "differential_inequality",
    "poincare",
)

_RUNNERS: Tuple[Callable[[_View], Any], ...] = (
    _average_conservation,
    _max_min_monotone,
    _oscillation_monotone,
    _gradient_contraction_sharp,
    _gradient_contraction_rank,
    _speed_and_drift,
    _discrete_variance,
    _variance_decay_discrete,
    _entropies,
    _entropy_rates,
    _energy_identity_continuous,
    _sigma_energy_identity,
    _power_energy_identity,
    _log_energy_identity,
    _energy_nondecreasing_steep_power,
    _variance_rate,
    _log_variance_rate,
    _consensus_time,
    _three_circles,
    _three_circles_interpolation,
    _nonlinear_frequency,
    _differential_inequality,
    _poincare,
)


def verify_trajectory_certificates(
    trajectory: Trajectory,
    enabled: Optional[Iterable[str]] = None,
) -> CertificateReport:
    """
    Run every certificate against the trajectory. Certificates whose hypotheses
    fail, or that `enabled` leaves out, are reported as not applicable.
    """
    wanted = set(CERTIFICATE_NAMES if enabled is None else enabled)
    unknown = wanted - set(CERTIFICATE_NAMES)
    if unknown:
        raise DomainError(f"Unknown certificates: {sorted(unknown)}.")

    if len(trajectory) < 2:
        entries = [_not_applicable(n, "trajectory has fewer than two samples") for n in CERTIFICATE_NAMES]
        return CertificateReport(entries=entries)

    view = _View(trajectory)
    found: Dict[str, CertificateEntry] = {}
    for runner in _RUNNERS:
        result = runner(view)
        for entry in result if isinstance(result, list) else [result]:
            found[entry.name] = entry

    entries = []
    for n in CERTIFICATE_NAMES:
        entry = found[n] if n in wanted else _not_applicable(n, "disabled in config")
        entries.append(entry)
    report = CertificateReport(entries=entries)
    counts = {status.value: sum(e.status == status for e in entries) for status in CertificateStatus}
    logger.info("certificates_checked mode=%s samples=%s %s", trajectory.mode.value, len(trajectory), counts)
    return report
