from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InvalidStateError
from src.dynamics.model import InfluenceModel
from src.kernels.kernel import KernelKind, sigma_supported, sigma_values
from src.state import DiagnosticsRecord, OpinionState, compute_diagnostics

DEFAULT_RENYI_ORDERS: Tuple[float, ...] = (0.5, 2.0, 5.0)


class EvolutionMode(str, Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class StopReason(str, Enum):
    COMPLETED = "completed"
    CONSENSUS = "consensus"
    STEP_UNDERFLOW = "step_underflow"
    STEP_LIMIT = "step_limit"


def _sigma_weight(model: InfluenceModel):
    kernel = model.kernel
    # quadrature per edge is too slow for per-step diagnostics
    if kernel.kind == KernelKind.CUSTOM or not sigma_supported(kernel):
        return None
    return lambda s: sigma_values(kernel, s)


def diagnostics_for(state: OpinionState, t: float, model: InfluenceModel) -> DiagnosticsRecord:
    alpha = model.power_alpha
    return compute_diagnostics(
        state,
        t,
        rho=model.kernel.values,
        sigma=_sigma_weight(model),
        renyi_orders=DEFAULT_RENYI_ORDERS,
        alpha=alpha if alpha is not None and 0 < alpha < 2 else None,
    )


@dataclass(frozen=True)
class Trajectory:
    """
    Time-indexed states with one diagnostics record per sample.

    Continuous runs also keep the state at the midpoint of every accepted
    step (`midpoints[i]` sits between samples i and i + 1) when stride is 1.
    """

    mode: EvolutionMode
    times: Tuple[float, ...]
    states: Tuple[OpinionState, ...]
    diagnostics: Tuple[DiagnosticsRecord, ...]
    model: InfluenceModel
    integrator_meta: Dict[str, Any] = field(default_factory=dict)
    stop_reason: StopReason = StopReason.COMPLETED
    stride: int = 1
    midpoints: Tuple[OpinionState, ...] = ()

    def __post_init__(self) -> None:
        if not (len(self.times) == len(self.states) == len(self.diagnostics)):
            raise InvalidStateError("Trajectory times, states and diagnostics must have equal length.")
        if not self.states:
            raise InvalidStateError("Trajectory needs at least the initial state.")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise InvalidStateError("Trajectory times must be strictly increasing.")
        if self.midpoints and len(self.midpoints) != len(self.states) - 1:
            raise InvalidStateError("Need one midpoint per step.")

    @classmethod
    def from_states(
        cls,
        mode: EvolutionMode,
        times: Sequence[float],
        states: Sequence[OpinionState],
        model: InfluenceModel,
        **kwargs: Any,
    ) -> "Trajectory":
        diagnostics = tuple(diagnostics_for(s, t, model) for s, t in zip(states, times))
        return cls(
            mode=mode,
            times=tuple(times),
            states=tuple(states),
            diagnostics=diagnostics,
            model=model,
            **kwargs,
        )

    def __len__(self) -> int:
        return len(self.states)

    @property
    def initial_state(self) -> OpinionState:
        return self.states[0]

    @property
    def final_state(self) -> OpinionState:
        return self.states[-1]

    @property
    def is_discrete(self) -> bool:
        return self.mode == EvolutionMode.DISCRETE

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.diagnostics], dtype=float)

    def first_merge_time(self) -> Optional[float]:
        """Time of the first merge after t = 0, or None."""
        events = [e["t"] for e in self.integrator_meta.get("merge_events", []) if e["t"] > 0]
        return min(events) if events else None
