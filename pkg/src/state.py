from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import pdist, squareform

from src.core.errors import DomainError, InvalidStateError


@dataclass(frozen=True)
class OpinionState:
    """
    u: Gamma -> R^n on the complete graph with d + 1 vertices.
    Row v of `values` is u(v). The array is stored read-only.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise InvalidStateError(f"State must be a (d+1) x n matrix, got shape {arr.shape}.")
        if arr.shape[0] < 2 or arr.shape[1] < 1:
            raise InvalidStateError(f"Need d >= 1 and n >= 1, got shape {arr.shape}.")
        if not np.all(np.isfinite(arr)):
            raise InvalidStateError("State entries must be finite.")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_rows(cls, rows: ArrayLike) -> "OpinionState":
        return cls(np.asarray(rows, dtype=float))

    @property
    def d(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def vertex_count(self) -> int:
        return self.values.shape[0]

    def shifted(self, offset: ArrayLike) -> "OpinionState":
        return OpinionState(self.values + np.asarray(offset, dtype=float))


def pairwise_distances(state: OpinionState) -> np.ndarray:
    return squareform(pdist(state.values))


def average(state: OpinionState) -> np.ndarray:
    return state.values.mean(axis=0)


def l2_squared(state: OpinionState) -> float:
    return float(np.sum(state.values**2))


def deviation_l2(state: OpinionState) -> float:
    """||u - A_u||_2."""
    return float(np.linalg.norm(state.values - average(state)))


def variance(state: OpinionState) -> float:
    centered = state.values - average(state)
    return float(np.sum(centered**2) / state.vertex_count)


def grad_sup_norm(state: OpinionState) -> float:
    return float(np.max(pdist(state.values)))


def max_deviation(state: OpinionState) -> float:
    """max_v |u(v) - A_u|."""
    return float(np.max(np.linalg.norm(state.values - average(state), axis=1)))


def _apply_weight(weight: Callable[[np.ndarray], Any], s: np.ndarray) -> np.ndarray:
    raw = weight(s)
    return np.broadcast_to(np.asarray(raw, dtype=float), s.shape)


def weighted_energy(state: OpinionState, weight: Callable[[np.ndarray], Any]) -> float:
    """(1/d) sum over unoriented edges of |du|^2 w(|du|); zero-length edges add nothing."""
    s = pdist(state.values)
    positive = s[s > 0]
    if positive.size == 0:
        return 0.0
    return float(np.sum(positive**2 * _apply_weight(weight, positive)) / state.d)


def _require_positive_scalar(state: OpinionState) -> np.ndarray:
    if state.n != 1:
        raise DomainError(f"Entropies need a scalar state, got n={state.n}.")
    u = state.values[:, 0]
    if np.any(u <= 0):
        raise DomainError("Entropies need strictly positive values.")
    return u


def entropy(state: OpinionState) -> float:
    u = _require_positive_scalar(state)
    return float(-np.sum(u * np.log(u)))


def power_sum(state: OpinionState, alpha: float) -> float:
    u = _require_positive_scalar(state)
    return float(np.sum(u**alpha))


def renyi_entropy(state: OpinionState, alpha: float) -> float:
    if alpha <= 0:
        raise DomainError(f"Renyi order must be > 0, got {alpha}.")
    if alpha == 1:
        raise DomainError("Renyi order 1 is the Shannon case; use entropy().")
    return float(np.log(power_sum(state, alpha)) / (1.0 - alpha))


def is_positive_scalar(state: OpinionState) -> bool:
    return state.n == 1 and bool(np.all(state.values > 0))


@dataclass
class DiagnosticsRecord:
    t: float
    max_per_coord: list
    min_per_coord: list
    osc: float
    mean: list
    variance: float
    l2_sq: float
    energy_rho: float
    energy_sigma: Optional[float] = None
    entropy: Optional[float] = None
    renyi: Dict[str, float] = field(default_factory=dict)
    I_alpha: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "max_per_coord": self.max_per_coord,
            "min_per_coord": self.min_per_coord,
            "osc": self.osc,
            "mean": self.mean,
            "variance": self.variance,
            "l2_sq": self.l2_sq,
            "energy_rho": self.energy_rho,
            "energy_sigma": self.energy_sigma,
            "entropy": self.entropy,
            "renyi": dict(self.renyi),
            "I_alpha": self.I_alpha,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DiagnosticsRecord":
        return cls(**{k: data.get(k) for k in cls.__dataclass_fields__ if k in data})


def compute_diagnostics(
    state: OpinionState,
    t: float,
    rho: Optional[Callable[[np.ndarray], Any]] = None,
    sigma: Optional[Callable[[np.ndarray], Any]] = None,
    renyi_orders: Iterable[float] = (),
    alpha: Optional[float] = None,
) -> DiagnosticsRecord:
    var = variance(state)
    record = DiagnosticsRecord(
        t=t,
        max_per_coord=state.values.max(axis=0).tolist(),
        min_per_coord=state.values.min(axis=0).tolist(),
        osc=grad_sup_norm(state),
        mean=average(state).tolist(),
        variance=var,
        l2_sq=l2_squared(state),
        energy_rho=weighted_energy(state, rho) if rho is not None else 0.0,
        energy_sigma=weighted_energy(state, sigma) if sigma is not None else None,
        I_alpha=var ** (alpha / 2.0) if alpha is not None else None,
    )
    if is_positive_scalar(state):
        record.entropy = entropy(state)
        record.renyi = {str(float(a)): renyi_entropy(state, a) for a in renyi_orders if a > 0 and a != 1}
    return record
