from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate

from src.core.errors import DomainError, UnsupportedKernelError

SIGMA_QUAD_RTOL = 1e-10


class KernelKind(str, Enum):
    CONSTANT = "constant"
    POWER = "power"
    CLAMPED_POWER = "clamped_power"
    SHIFTED_POWER = "shifted_power"
    TABLE = "table"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Kernel:
    """
    Influence kernel rho(s) of the opinion distance s.

    constant       rho = p
    power          rho = s^-alpha
    clamped_power  rho = c * s^-alpha
    shifted_power  rho = (1 + s)^-alpha
    table          linear interpolation of (s, rho) knots, constant outside
    custom         any callable float -> float

    With cap_at_one the value is min(1, rho). Instances are immutable and
    can be evaluated from several threads.
    """

    kind: KernelKind
    p: float = 0.0
    alpha: float = 0.0
    c: float = 1.0
    knots: Tuple[Tuple[float, float], ...] = ()
    func: Optional[Callable[[float], float]] = None
    derivative: Optional[Callable[[float], float]] = None
    cap_at_one: bool = False

    def __post_init__(self) -> None:
        if self.p < 0 or not math.isfinite(self.p):
            raise DomainError(f"Kernel level p must be finite and >= 0, got {self.p}.")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise DomainError(f"Kernel exponent alpha must be finite and >= 0, got {self.alpha}.")
        if self.c <= 0 or not math.isfinite(self.c):
            raise DomainError(f"Kernel coefficient c must be finite and > 0, got {self.c}.")
        if self.kind == KernelKind.TABLE:
            if not self.knots:
                raise DomainError("Table kernel needs at least one (s, rho) knot.")
            xs = [k[0] for k in self.knots]
            if any(x < 0 for x in xs) or any(b <= a for a, b in zip(xs, xs[1:])):
                raise DomainError("Table kernel knots must have strictly increasing s >= 0.")
            if any(k[1] < 0 or not math.isfinite(k[1]) for k in self.knots):
                raise DomainError("Table kernel values must be finite and >= 0.")
        if self.kind == KernelKind.CUSTOM and self.func is None:
            raise DomainError("Custom kernel requires a callable.")

    # Constructors

    @classmethod
    def constant(cls, p: float, cap_at_one: bool = False) -> "Kernel":
        return cls(KernelKind.CONSTANT, p=float(p), cap_at_one=cap_at_one)

    @classmethod
    def power(cls, alpha: float, cap_at_one: bool = False) -> "Kernel":
        return cls(KernelKind.POWER, alpha=float(alpha), cap_at_one=cap_at_one)

    @classmethod
    def clamped_power(cls, c: float, alpha: float, cap_at_one: bool = True) -> "Kernel":
        return cls(KernelKind.CLAMPED_POWER, c=float(c), alpha=float(alpha), cap_at_one=cap_at_one)

    @classmethod
    def shifted_power(cls, alpha: float) -> "Kernel":
        return cls(KernelKind.SHIFTED_POWER, alpha=float(alpha), cap_at_one=True)

    @classmethod
    def table(cls, knots, cap_at_one: bool = False) -> "Kernel":
        pairs = tuple((float(s), float(r)) for s, r in knots)
        return cls(KernelKind.TABLE, knots=pairs, cap_at_one=cap_at_one)

    @classmethod
    def custom(
        cls,
        func: Callable[[float], float],
        derivative: Optional[Callable[[float], float]] = None,
        cap_at_one: bool = False,
    ) -> "Kernel":
        return cls(KernelKind.CUSTOM, func=func, derivative=derivative, cap_at_one=cap_at_one)

    # Properties

    @property
    def coefficient(self) -> float:
        return 1.0 if self.kind == KernelKind.POWER else self.c

    @property
    def singular(self) -> bool:
        return self.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER) and self.alpha > 0

    @property
    def derivative_available(self) -> bool:
        if self.kind == KernelKind.TABLE:
            return False
        if self.kind == KernelKind.CUSTOM:
            return self.derivative is not None
        return True

    @property
    def bounded_by_one(self) -> bool:
        """True when rho <= 1 everywhere, which the time-one map needs."""
        if self.cap_at_one or self.kind == KernelKind.SHIFTED_POWER:
            return True
        if self.kind == KernelKind.CONSTANT:
            return self.p <= 1.0
        if self.kind == KernelKind.TABLE:
            return max(k[1] for k in self.knots) <= 1.0
        return False

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Distances where rho is not smooth."""
        if self.kind == KernelKind.TABLE:
            return tuple(k[0] for k in self.knots)
        if self.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER) and self.cap_at_one:
            if self.alpha > 0:
                return (self.coefficient ** (1.0 / self.alpha),)
        return ()

    # Evaluation

    def values(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.kind == KernelKind.CONSTANT:
                out = np.full_like(s, self.p)
            elif self.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER):
                out = self.coefficient * np.power(s, -self.alpha)
            elif self.kind == KernelKind.SHIFTED_POWER:
                out = np.power(1.0 + s, -self.alpha)
            elif self.kind == KernelKind.TABLE:
                xs, ys = zip(*self.knots)
                out = np.interp(s, xs, ys)
            else:
                out = np.vectorize(self.func, otypes=[float])(s)
        if self.cap_at_one:
            out = np.minimum(out, 1.0)
        return out

    def __call__(self, s: ArrayLike) -> np.ndarray:
        return self.values(s)

    def derivative_values(self, s: ArrayLike) -> np.ndarray:
        if not self.derivative_available:
            raise UnsupportedKernelError(f"No analytic derivative for {self.kind.value} kernel.")
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            if self.kind == KernelKind.CONSTANT:
                out = np.zeros_like(s)
            elif self.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER):
                out = -self.alpha * self.coefficient * np.power(s, -self.alpha - 1.0)
                if self.cap_at_one:
                    out = np.where(self.coefficient * np.power(s, -self.alpha) > 1.0, 0.0, out)
            elif self.kind == KernelKind.SHIFTED_POWER:
                out = -self.alpha * np.power(1.0 + s, -self.alpha - 1.0)
            else:
                out = np.vectorize(self.derivative, otypes=[float])(s)
                if self.cap_at_one:
                    raw = np.vectorize(self.func, otypes=[float])(s)
                    out = np.where(raw > 1.0, 0.0, out)
        return out

    def to_spec(self) -> Dict[str, Any]:
        spec: Dict[str, Any] = {"type": self.kind.value, "cap_at_one": self.cap_at_one}
        if self.kind == KernelKind.CONSTANT:
            spec["p"] = self.p
        elif self.kind in (KernelKind.POWER, KernelKind.SHIFTED_POWER):
            spec["alpha"] = self.alpha
        elif self.kind == KernelKind.CLAMPED_POWER:
            spec.update({"c": self.c, "alpha": self.alpha})
        elif self.kind == KernelKind.TABLE:
            spec["knots"] = [list(k) for k in self.knots]
        return spec


def eval_kernel(kernel: Kernel, s: float) -> float:
    if s < 0 or math.isnan(s):
        raise DomainError(f"Kernel argument must be >= 0, got {s}.")
    return float(kernel.values(s))


def weighted_difference(kernel: Kernel, diff: ArrayLike) -> np.ndarray:
    """
    diff * rho(|diff|) over the last axis, with the zero vector wherever
    diff itself is zero. Singular kernels are never evaluated at 0 here.
    """
    diff = np.asarray(diff, dtype=float)
    norms = np.linalg.norm(diff, axis=-1)
    positive = norms > 0
    factor = np.zeros_like(norms)
    factor[positive] = kernel.values(norms[positive])
    return diff * factor[..., None]


# sigma(s) = 2 * int_0^s tau rho(tau) dtau / s^2


def sigma_by_quadrature(kernel: Kernel, s: float) -> float:
    if s <= 0:
        raise DomainError(f"sigma is defined for s > 0, got {s}.")
    if kernel.singular and not kernel.cap_at_one and kernel.alpha >= 2:
        raise UnsupportedKernelError(
            f"int_0^s tau^(1-alpha) diverges for alpha={kernel.alpha}; "
            "use formal_sigma_inverse_square for alpha = 2."
        )
    points = [b for b in kernel.breakpoints if 0 < b < s] or None
    value, _ = integrate.quad(
        lambda tau: tau * float(kernel.values(tau)),
        0.0,
        s,
        epsabs=0.0,
        epsrel=SIGMA_QUAD_RTOL,
        limit=400,
        points=points,
    )
    return 2.0 * value / (s * s)


def _shifted_power_moment(alpha: float, s: np.ndarray) -> np.ndarray:
    # int_0^s tau (1 + tau)^-alpha dtau
    w = 1.0 + s
    if math.isclose(alpha, 1.0):
        return s - np.log(w)
    if math.isclose(alpha, 2.0):
        return np.log(w) + 1.0 / w - 1.0
    return (np.power(w, 2.0 - alpha) - 1.0) / (2.0 - alpha) - (np.power(w, 1.0 - alpha) - 1.0) / (1.0 - alpha)


def _table_moment(knots: Tuple[Tuple[float, float], ...], s: float) -> float:
    # exact int_0^s tau rho(tau) for piecewise linear rho, constant extrapolation
    xs = [0.0] + [k[0] for k in knots if k[0] > 0] + [math.inf]
    total = 0.0
    for left, right in zip(xs, xs[1:]):
        if left >= s:
            break
        r = min(right, s)
        rho_l = float(np.interp(left, *zip(*knots)))
        if math.isinf(right):
            slope = 0.0
        else:
            rho_r = float(np.interp(right, *zip(*knots)))
            slope = (rho_r - rho_l) / (right - left)
        intercept = rho_l - slope * left
        total += intercept * (r * r - left * left) / 2.0 + slope * (r**3 - left**3) / 3.0
    return total


def sigma_from_rho(kernel: Kernel, s: float) -> float:
    if s <= 0 or math.isnan(s):
        raise DomainError(f"sigma is defined for s > 0, got {s}.")
    return float(sigma_values(kernel, np.asarray([s]))[0])


def sigma_supported(kernel: Kernel) -> bool:
    return not (kernel.singular and not kernel.cap_at_one and kernel.alpha >= 2)


def sigma_values(kernel: Kernel, s: ArrayLike) -> np.ndarray:
    """Vectorized sigma for s > 0, closed form where one exists."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError("sigma is defined for s > 0 only.")
    if not sigma_supported(kernel):
        raise UnsupportedKernelError(
            f"sigma diverges for power kernels with alpha={kernel.alpha} >= 2; "
            "use formal_sigma_inverse_square for alpha = 2."
        )
    kind = kernel.kind
    if kind == KernelKind.CONSTANT:
        level = min(kernel.p, 1.0) if kernel.cap_at_one else kernel.p
        return np.full_like(s, level)
    if kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER):
        coef, alpha = kernel.coefficient, kernel.alpha
        if not kernel.cap_at_one:
            return coef * 2.0 / (2.0 - alpha) * np.power(s, -alpha)
        if alpha == 0:
            return np.full_like(s, min(coef, 1.0))
        knee = coef ** (1.0 / alpha)
        tail_s = np.maximum(s, knee)
        if math.isclose(alpha, 2.0):
            tail = coef * np.log(tail_s / knee)
        else:
            tail = coef * (np.power(tail_s, 2.0 - alpha) - knee ** (2.0 - alpha)) / (2.0 - alpha)
        moment = np.where(s <= knee, s * s / 2.0, knee * knee / 2.0 + tail)
        return 2.0 * moment / (s * s)
    if kind == KernelKind.SHIFTED_POWER:
        return 2.0 * _shifted_power_moment(kernel.alpha, s) / (s * s)
    if kind == KernelKind.TABLE and (not kernel.cap_at_one or max(k[1] for k in kernel.knots) <= 1.0):
        return np.array([2.0 * _table_moment(kernel.knots, float(x)) / (x * x) for x in s.ravel()]).reshape(s.shape)
    return np.array([sigma_by_quadrature(kernel, float(x)) for x in s.ravel()]).reshape(s.shape)


def formal_sigma_inverse_square(s: ArrayLike) -> np.ndarray:
    """Formal weight 2 s^-2 log s paired with rho(s) = s^-2."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * np.log(s) / (s * s)
