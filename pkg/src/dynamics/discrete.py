from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from src.core.config import settings
from src.core.errors import DomainError, ModelInvalidError
from src.dynamics.model import InfluenceModel, apply_L, effective_weights
from src.dynamics.trajectory import EvolutionMode, StopReason, Trajectory, diagnostics_for
from src.state import OpinionState, grad_sup_norm

logger = logging.getLogger(__name__)

_WEIGHT_TOL = 1e-12


def check_convex_weights(weights: np.ndarray, d: int) -> None:
    """Per-neighbour weights mu/d must lie in [0, 1] with row sums <= 1."""
    scaled = weights / d
    bad = np.argwhere((scaled < -_WEIGHT_TOL) | (scaled > 1.0 + _WEIGHT_TOL))
    if bad.size:
        v, w = (int(i) for i in bad[0])
        raise ModelInvalidError(
            f"Weight mu[{v},{w}]/d = {scaled[v, w]:.6g} is outside [0, 1]; discrete mode needs cap_at_one kernels."
        )
    rows = scaled.sum(axis=1)
    over = np.flatnonzero(rows > 1.0 + _WEIGHT_TOL)
    if over.size:
        v = int(over[0])
        w = int(np.argmax(scaled[v]))
        raise ModelInvalidError(
            f"Weights of vertex {v} sum to {rows[v]:.6g} > 1 (largest from pair ({v},{w})); time-one map is not convex."
        )


def time_one_map(state: OpinionState, model: InfluenceModel) -> OpinionState:
    """A_u = u + L_mu u, a convex combination of the current opinions."""
    weights = effective_weights(state, model)
    check_convex_weights(weights, state.d)
    return OpinionState(state.values + apply_L(state, model, weights=weights))


def evolve_discrete(
    state: OpinionState,
    model: InfluenceModel,
    steps: int,
    stride: int = 1,
    consensus_rel: Optional[float] = None,
) -> Trajectory:
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}.")
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}.")
    if not model.weights_bounded_by_one:
        raise ModelInvalidError("Discrete evolution needs a kernel bounded by one (set cap_at_one).")

    rel = settings.consensus_rel if consensus_rel is None else consensus_rel
    floor = rel * (1.0 + grad_sup_norm(state))

    times = [0]
    states = [state]
    stop = StopReason.COMPLETED
    current = state
    for t in range(1, steps + 1):
        current = time_one_map(current, model)
        reached = grad_sup_norm(current) < floor
        if t % stride == 0 or t == steps or reached:
            times.append(t)
            states.append(current)
        if reached and t < steps:
            stop = StopReason.CONSENSUS
            break

    logger.info(
        "evolve_complete mode=discrete steps=%s samples=%s stop=%s",
        times[-1],
        len(states),
        stop.value,
    )
    return Trajectory(
        mode=EvolutionMode.DISCRETE,
        times=tuple(times),
        states=tuple(states),
        diagnostics=tuple(diagnostics_for(s, t, model) for s, t in zip(states, times)),
        model=model,
        integrator_meta={"steps_requested": steps},
        stop_reason=stop,
        stride=stride,
    )
