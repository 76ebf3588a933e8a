from __future__ import annotations

import logging
import math
from typing import Callable, List, Optional

import numpy as np

from src.core.config import settings
from src.core.errors import DomainError
from src.dynamics.model import InfluenceModel, velocity_field
from src.dynamics.trajectory import EvolutionMode, StopReason, Trajectory, diagnostics_for
from src.state import OpinionState, grad_sup_norm

logger = logging.getLogger(__name__)

MIN_TOL = 1e-12
MAX_TOL = 1e-2
_GROW_MARGIN = 32.0
_MIN_STEP_REL = 1e-14
# an open pair may close at most this fraction of its gap in one step
_COLLISION_FRACTION = 0.5
# accepted steps must move the fastest vertex at least this fraction of h * |u_t|
_STALL_FRACTION = 0.25


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], u: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * h * k1)
    k3 = rhs(u + 0.5 * h * k2)
    k4 = rhs(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _pair_distances(values: np.ndarray) -> np.ndarray:
    return np.linalg.norm(values[None, :, :] - values[:, None, :], axis=-1)


def collision_step(values: np.ndarray, velocity: np.ndarray, labels: np.ndarray) -> float:
    """Largest h for which no pair from different groups closes more than half its gap."""
    closing = _pair_distances(velocity)
    open_pair = (labels[:, None] != labels[None, :]) & (closing > 0)
    if not np.any(open_pair):
        return math.inf
    dist = _pair_distances(values)
    return _COLLISION_FRACTION * float(np.min(dist[open_pair] / closing[open_pair]))


class MergeGroups:
    """
    Rigid groups of vertices that have collided under a singular kernel.

    Members of one group do not interact with each other and share the group's
    mean velocity, which keeps the average of u unchanged.
    """

    def __init__(self, size: int) -> None:
        self.labels = np.arange(size)
        self.events: List[dict] = []

    @property
    def count(self) -> int:
        return len(np.unique(self.labels))

    def detached(self) -> np.ndarray:
        same = self.labels[:, None] == self.labels[None, :]
        np.fill_diagonal(same, False)
        return same

    def merge(self, v: int, w: int, t: float, distance: float, reason: str) -> bool:
        a, b = self.labels[v], self.labels[w]
        if a == b:
            return False
        self.labels[self.labels == b] = a
        self.events.append({"t": float(t), "pair": [int(v), int(w)], "distance": float(distance), "reason": reason})
        logger.debug("merge t=%.6g pair=(%s,%s) distance=%.3g reason=%s", t, v, w, distance, reason)
        return True

    def merge_close(self, values: np.ndarray, t: float, threshold: float) -> bool:
        dist = _pair_distances(values)
        changed = False
        for v, w in np.argwhere(np.triu(dist < threshold, k=1)):
            changed = self.merge(int(v), int(w), t, dist[v, w], "distance") or changed
        return changed

    def closest_open_pair(self, values: np.ndarray):
        dist = _pair_distances(values)
        dist[self.labels[:, None] == self.labels[None, :]] = np.inf
        v, w = np.unravel_index(int(np.argmin(dist)), dist.shape)
        return int(v), int(w), float(dist[v, w])

    def rigid(self, rhs: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
        groups = [np.flatnonzero(self.labels == g) for g in np.unique(self.labels)]
        groups = [g for g in groups if g.size > 1]
        if not groups:
            return rhs

        def projected(values: np.ndarray) -> np.ndarray:
            out = rhs(values)
            for g in groups:
                out[g] = out[g].mean(axis=0)
            return out

        return projected


def evolve_continuous(
    state: OpinionState,
    model: InfluenceModel,
    t_end: float,
    tol: Optional[float] = None,
    max_step: Optional[float] = None,
    stride: int = 1,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """
    Integrate du/dt = L_mu u with classical RK4 and step doubling.

    The local error of a step of size h is estimated as |two halves - full| / 15
    and the step is accepted when that estimate is <= tol * h; the two-half-step
    result is kept.

    For singular kernels the field is discontinuous at collisions, where RK4
    stages that carry a pair past each other can cancel to a zero step with a
    zero error estimate. Steps are therefore capped by `collision_step`, and a
    step that moves less than _STALL_FRACTION * h * |u_t| is rejected. Pairs
    closer than MERGE_REL * (1 + osc0) join a rigid group. When the step size
    underflows next to a collision, the closest pair is merged as well if it is
    within sqrt(MERGE_REL) * (1 + osc0); otherwise the run stops with
    step_underflow.
    """
    tol = settings.default_tol if tol is None else tol
    max_step = settings.max_step if max_step is None else max_step
    max_steps = settings.max_continuous_steps if max_steps is None else max_steps
    if not (t_end > 0):
        raise DomainError(f"t_end must be > 0, got {t_end}.")
    if not (MIN_TOL < tol < MAX_TOL):
        raise DomainError(f"tol must lie in ({MIN_TOL}, {MAX_TOL}), got {tol}.")
    if not (max_step > 0):
        raise DomainError(f"max_step must be > 0, got {max_step}.")
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}.")
    model.validate()

    osc0 = grad_sup_norm(state)
    singular = model.kernel.singular and not model.kernel.cap_at_one
    merge_threshold = settings.merge_rel * (1.0 + osc0)
    stiff_threshold = math.sqrt(settings.merge_rel) * (1.0 + osc0)
    floor = merge_threshold if singular else settings.consensus_rel * (1.0 + osc0)

    groups = MergeGroups(state.vertex_count)

    def build_rhs() -> Callable[[np.ndarray], np.ndarray]:
        return groups.rigid(velocity_field(model, groups.detached()))

    if singular:
        groups.merge_close(state.values, 0.0, merge_threshold)
    rhs = build_rhs()

    times: List[float] = [0.0]
    states: List[OpinionState] = [state]
    midpoints: List[OpinionState] = []
    u = state.values.copy()
    t = 0.0
    h = min(max_step, t_end)
    accepted = rejected = 0
    min_step = h
    stop = StopReason.CONSENSUS if osc0 <= floor or groups.count == 1 else StopReason.COMPLETED

    while stop == StopReason.COMPLETED and t < t_end:
        if accepted + rejected >= max_steps:
            stop = StopReason.STEP_LIMIT
            break
        h = min(h, t_end - t, max_step)
        if singular:
            velocity = rhs(u)
            h = min(h, collision_step(u, velocity, groups.labels))
        if h < _MIN_STEP_REL * (1.0 + t):
            v, w, dist = groups.closest_open_pair(u) if singular else (0, 0, math.inf)
            if dist < stiff_threshold and groups.merge(v, w, t, dist, "stiff"):
                rhs = build_rhs()
                h = max_step
                if groups.count == 1:
                    stop = StopReason.CONSENSUS
                continue
            stop = StopReason.STEP_UNDERFLOW
            break

        full = rk4_step(rhs, u, h)
        half = rk4_step(rhs, u, 0.5 * h)
        two = rk4_step(rhs, half, 0.5 * h)
        err = float(np.max(np.abs(two - full))) / 15.0 if np.all(np.isfinite(two)) and np.all(np.isfinite(full)) else math.inf
        stalled = singular and float(np.max(np.abs(two - u))) < _STALL_FRACTION * h * float(np.max(np.abs(velocity)))
        if err > tol * h or stalled:
            rejected += 1
            h *= 0.5
            continue

        accepted += 1
        min_step = min(min_step, h)
        t = t_end if t_end - (t + h) <= _MIN_STEP_REL * t_end else t + h
        u = two
        done = grad_sup_norm(OpinionState(u)) <= floor
        if accepted % stride == 0 or t >= t_end or done:
            times.append(t)
            states.append(OpinionState(u))
            if stride == 1:
                midpoints.append(OpinionState(half))
        if singular and groups.merge_close(u, t, merge_threshold):
            rhs = build_rhs()
            done = done or groups.count == 1
        if done:
            if times[-1] != t:
                times.append(t)
                states.append(OpinionState(u))
            stop = StopReason.CONSENSUS
            break
        if err < tol * h / _GROW_MARGIN:
            h *= 2.0

    meta = {
        "tol": tol,
        "max_step": max_step,
        "accepted_steps": accepted,
        "rejected_steps": rejected,
        "min_step": min_step,
        "t_end": t_end,
        "t_reached": t,
        "merge_threshold": merge_threshold if singular else None,
        "merge_events": groups.events,
    }
    if stop == StopReason.CONSENSUS:
        meta["consensus_time"] = t
    logger.info(
        "evolve_complete mode=continuous t=%.6g accepted=%s rejected=%s stop=%s merges=%s",
        t,
        accepted,
        rejected,
        stop.value,
        len(groups.events),
    )
    return Trajectory(
        mode=EvolutionMode.CONTINUOUS,
        times=tuple(times),
        states=tuple(states),
        diagnostics=tuple(diagnostics_for(s, ti, model) for s, ti in zip(states, times)),
        model=model,
        integrator_meta=meta,
        stop_reason=stop,
        stride=stride,
        midpoints=tuple(midpoints),
    )
