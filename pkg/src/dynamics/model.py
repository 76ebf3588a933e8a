from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from numpy.typing import ArrayLike

from src.core.errors import DomainError, UnsupportedCombinationError
from src.kernels.kernel import Kernel, KernelKind
from src.state import OpinionState


class InfluenceVariant(str, Enum):
    STANDARD = "standard"
    RANK_DEPENDENT = "rank_dependent"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class RankKernel:
    """
    rho(r, s), nonincreasing in the speaker's rank norm r and in the distance s.

    Either the product rank_factor(r) * distance_factor(s) or a vectorized
    callable func(r, s).
    """

    rank_factor: Optional[Kernel] = None
    distance_factor: Optional[Kernel] = None
    func: Optional[Callable[[np.ndarray, np.ndarray], Any]] = None
    cap_at_one: bool = False

    def __post_init__(self) -> None:
        if self.func is None and (self.rank_factor is None or self.distance_factor is None):
            raise DomainError("Rank kernel needs both factors or a callable.")

    @classmethod
    def product(cls, rank_factor: Kernel, distance_factor: Kernel) -> "RankKernel":
        return cls(rank_factor=rank_factor, distance_factor=distance_factor)

    @classmethod
    def custom(cls, func: Callable[[np.ndarray, np.ndarray], Any], cap_at_one: bool = False) -> "RankKernel":
        return cls(func=func, cap_at_one=cap_at_one)

    @classmethod
    def distance_only(cls, kernel: Kernel) -> "RankKernel":
        return cls(rank_factor=Kernel.constant(1.0), distance_factor=kernel)

    @property
    def bounded_by_one(self) -> bool:
        if self.func is not None:
            return self.cap_at_one
        return self.rank_factor.bounded_by_one and self.distance_factor.bounded_by_one

    def values(self, r: ArrayLike, s: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        if self.func is not None:
            out = np.asarray(self.func(*np.broadcast_arrays(r, s)), dtype=float)
        else:
            out = self.rank_factor.values(r) * self.distance_factor.values(s)
        if self.cap_at_one:
            out = np.minimum(out, 1.0)
        return out

    def __call__(self, r: ArrayLike, s: ArrayLike) -> np.ndarray:
        return self.values(r, s)

    def to_spec(self) -> Dict[str, Any]:
        if self.func is not None:
            return {"type": "custom", "cap_at_one": self.cap_at_one}
        return {"rank": self.rank_factor.to_spec(), "distance": self.distance_factor.to_spec()}


@dataclass(frozen=True)
class InfluenceModel:
    kernel: Kernel
    variant: InfluenceVariant = InfluenceVariant.STANDARD
    rank_kernel: Optional[RankKernel] = None

    @classmethod
    def standard(cls, kernel: Kernel) -> "InfluenceModel":
        return cls(kernel=kernel)

    @classmethod
    def normalized(cls, kernel: Kernel) -> "InfluenceModel":
        return cls(kernel=kernel, variant=InfluenceVariant.NORMALIZED)

    @classmethod
    def rank_dependent(cls, rank_kernel: RankKernel, kernel: Optional[Kernel] = None) -> "InfluenceModel":
        # kernel is only used for energies and sigma; default to the distance factor
        base = kernel or rank_kernel.distance_factor or Kernel.constant(1.0)
        return cls(kernel=base, variant=InfluenceVariant.RANK_DEPENDENT, rank_kernel=rank_kernel)

    def validate(self) -> None:
        if self.variant == InfluenceVariant.NORMALIZED and self.rank_kernel is not None:
            raise UnsupportedCombinationError("Rank-dependent kernels cannot be combined with normalized weights.")
        if self.variant == InfluenceVariant.RANK_DEPENDENT and self.rank_kernel is None:
            raise DomainError("Rank-dependent model requires a rank kernel.")

    @property
    def symmetric(self) -> bool:
        return self.variant == InfluenceVariant.STANDARD

    @property
    def weights_bounded_by_one(self) -> bool:
        if self.variant == InfluenceVariant.RANK_DEPENDENT and self.rank_kernel is not None:
            return self.rank_kernel.bounded_by_one
        return self.kernel.bounded_by_one

    @property
    def power_alpha(self) -> Optional[float]:
        """alpha of a power-type kernel, else None."""
        if self.kernel.kind in (KernelKind.POWER, KernelKind.CLAMPED_POWER):
            return self.kernel.alpha
        return None

    def to_spec(self) -> Dict[str, Any]:
        spec: Dict[str, Any] = {"kernel": self.kernel.to_spec(), "variant": self.variant.value}
        if self.rank_kernel is not None:
            spec["rank_kernel"] = self.rank_kernel.to_spec()
        return spec


def _kernel_matrix(kernel: Kernel, dist: np.ndarray) -> np.ndarray:
    rho = np.array(kernel.values(dist), dtype=float)
    # singular uncapped kernels at coincident pairs; the difference is zero there anyway
    rho[~np.isfinite(rho)] = 0.0
    np.fill_diagonal(rho, 0.0)
    return rho


def _weights_from_values(
    values: np.ndarray,
    model: InfluenceModel,
    detached: Optional[np.ndarray],
) -> np.ndarray:
    d = values.shape[0] - 1
    dist = np.linalg.norm(values[None, :, :] - values[:, None, :], axis=-1)
    if model.variant == InfluenceVariant.RANK_DEPENDENT:
        rank = np.linalg.norm(values, axis=1)
        mu = np.array(model.rank_kernel.values(rank[:, None], dist), dtype=float)
        mu[~np.isfinite(mu)] = 0.0
        np.fill_diagonal(mu, 0.0)
    elif model.variant == InfluenceVariant.NORMALIZED:
        rho = _kernel_matrix(model.kernel, dist)
        totals = rho.sum(axis=1, keepdims=True)
        safe = np.where(totals > 0, totals, 1.0)
        mu = np.where(totals > 0, d * rho**2 / safe, 0.0)
    else:
        mu = _kernel_matrix(model.kernel, dist)
    if detached is not None:
        mu = np.where(detached, 0.0, mu)
    return mu


def _apply_L_values(values: np.ndarray, mu: np.ndarray) -> np.ndarray:
    diffs = values[None, :, :] - values[:, None, :]
    return np.einsum("vw,vwn->vn", mu, diffs) / (values.shape[0] - 1)


def effective_weights(
    state: OpinionState,
    model: InfluenceModel,
    detached: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    mu[v, w] for every ordered pair, zero on the diagonal.

    `detached` marks pairs whose mutual interaction is switched off
    (merged groups in continuous runs).
    """
    model.validate()
    return _weights_from_values(state.values, model, detached)


def apply_L(
    state: OpinionState,
    model: InfluenceModel,
    weights: Optional[np.ndarray] = None,
    detached: Optional[np.ndarray] = None,
) -> np.ndarray:
    """L_mu u(v) = (1/d) sum_w [u(w) - u(v)] mu[v, w]."""
    mu = weights if weights is not None else effective_weights(state, model, detached)
    return _apply_L_values(state.values, mu)


def velocity_field(model: InfluenceModel, detached: Optional[np.ndarray] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Raw-array right-hand side u -> L_mu u for the integrator."""
    model.validate()

    def rhs(values: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return _apply_L_values(values, _weights_from_values(values, model, detached))

    return rhs
