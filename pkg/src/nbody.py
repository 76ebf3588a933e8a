from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import pdist, squareform

from src.core.errors import DomainError, SingularityError
from src.dynamics.model import InfluenceModel, apply_L
from src.kernels.kernel import Kernel
from src.state import OpinionState

logger = logging.getLogger(__name__)

CLOSE_ENCOUNTER_REL = 1e-6


@dataclass(frozen=True)
class PhaseState:
    """Positions and velocities of N bodies in R^3 with their masses."""

    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    G: float = 1.0

    def __post_init__(self) -> None:
        x = np.array(self.positions, dtype=float, copy=True)
        v = np.array(self.velocities, dtype=float, copy=True)
        m = np.array(self.masses, dtype=float, copy=True).reshape(-1)
        if x.ndim != 2 or x.shape[1] != 3:
            raise DomainError(f"positions must be an N x 3 matrix, got shape {x.shape}.")
        if v.shape != x.shape:
            raise DomainError(f"velocities must match positions {x.shape}, got {v.shape}.")
        if m.shape != (x.shape[0],):
            raise DomainError(f"Need one mass per body, got {m.size} for {x.shape[0]} bodies.")
        if np.any(m <= 0) or not np.all(np.isfinite(m)):
            raise DomainError("Masses must be finite and > 0.")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DomainError("Positions and velocities must be finite.")
        if not (self.G > 0 and math.isfinite(self.G)):
            raise DomainError(f"G must be finite and > 0, got {self.G}.")
        for arr in (x, v, m):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "masses", m)

    @property
    def body_count(self) -> int:
        return self.positions.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def replace(self, positions: ArrayLike, velocities: ArrayLike) -> "PhaseState":
        return PhaseState(positions=positions, velocities=velocities, masses=self.masses, G=self.G)


def _separations(phase: PhaseState) -> np.ndarray:
    return squareform(pdist(phase.positions))


def _check_distinct(phase: PhaseState, dist: np.ndarray) -> None:
    hits = np.argwhere(np.triu(dist == 0, k=1))
    if hits.size:
        i, k = (int(j) for j in hits[0])
        raise SingularityError(f"Bodies {i} and {k} share the position {phase.positions[i].tolist()}.")


def nbody_acceleration(phase: PhaseState) -> np.ndarray:
    """G sum_{k != i} m_k (x_k - x_i) / |x_k - x_i|^3."""
    dist = _separations(phase)
    _check_distinct(phase, dist)
    x = phase.positions
    diffs = x[None, :, :] - x[:, None, :]
    inv_cube = np.zeros_like(dist)
    off = ~np.eye(phase.body_count, dtype=bool)
    inv_cube[off] = dist[off] ** -3.0
    return phase.G * np.einsum("ik,k,ikn->in", inv_cube, phase.masses, diffs)


def nbody_step(phase: PhaseState, substep: float = 1.0) -> PhaseState:
    """x <- x + h v, v <- v + h a(x), with the acceleration taken at the old positions."""
    if not (0 < substep <= 1):
        raise DomainError(f"substep must lie in (0, 1], got {substep}.")
    accel = nbody_acceleration(phase)
    return phase.replace(
        positions=phase.positions + substep * phase.velocities,
        velocities=phase.velocities + substep * accel,
    )


def nbody_time_one(phase: PhaseState) -> PhaseState:
    return nbody_step(phase, 1.0)


@dataclass(frozen=True)
class NBodyDiagnostics:
    t: float
    total_weighted_position: List[float]
    total_momentum: List[float]
    moment_of_inertia: float
    potential: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "total_weighted_position": self.total_weighted_position,
            "total_momentum": self.total_momentum,
            "moment_of_inertia": self.moment_of_inertia,
            "potential": self.potential,
        }


def nbody_diagnostics(phase: PhaseState, t: float = 0.0) -> NBodyDiagnostics:
    """
    Sum m x, sum m v, I = (1/M) sum_{i<j} m_i m_j |x_i - x_j|^2 and
    U = sum_{i<j} m_i m_j / |x_i - x_j|.
    """
    m = phase.masses
    s = pdist(phase.positions)
    if np.any(s == 0):
        _check_distinct(phase, squareform(s))
    pair_mass = pdist(m[:, None], lambda a, b: a[0] * b[0])
    return NBodyDiagnostics(
        t=float(t),
        total_weighted_position=(m @ phase.positions).tolist(),
        total_momentum=(m @ phase.velocities).tolist(),
        moment_of_inertia=float(np.sum(pair_mass * s**2) / phase.total_mass),
        potential=float(np.sum(pair_mass / s)) if s.size else 0.0,
    )


class NBodyStopReason(str, Enum):
    COMPLETED = "completed"
    CLOSE_ENCOUNTER = "close_encounter"


@dataclass
class NBodyRun:
    phases: List[PhaseState]
    diagnostics: List[NBodyDiagnostics]
    substep: float
    stop_reason: NBodyStopReason = NBodyStopReason.COMPLETED
    detail: str = ""
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def final_phase(self) -> PhaseState:
        return self.phases[-1]


def nbody_evolve(phase: PhaseState, steps: int, substep: float = 1.0) -> NBodyRun:
    """
    Iterate nbody_step. The run is truncated when two bodies come closer than
    CLOSE_ENCOUNTER_REL times the initial largest separation.
    """
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}.")
    if not (0 < substep <= 1):
        raise DomainError(f"substep must lie in (0, 1], got {substep}.")

    initial = pdist(phase.positions)
    scale = float(initial.max()) if initial.size else 0.0
    threshold = CLOSE_ENCOUNTER_REL * scale

    run = NBodyRun(phases=[phase], diagnostics=[nbody_diagnostics(phase)], substep=substep)
    current = phase
    for k in range(1, steps + 1):
        current = nbody_step(current, substep)
        sep = pdist(current.positions)
        if sep.size and float(sep.min()) < threshold:
            pair = _closest_pair(current)
            run.stop_reason = NBodyStopReason.CLOSE_ENCOUNTER
            run.detail = f"bodies {pair[0]} and {pair[1]} within {float(sep.min()):.3g} at step {k}"
            break
        run.phases.append(current)
        run.diagnostics.append(nbody_diagnostics(current, t=k * substep))

    run.meta = {
        "steps_requested": steps,
        "steps_taken": len(run.phases) - 1,
        "substep": substep,
        "close_encounter_threshold": threshold,
    }
    logger.info(
        "nbody_complete bodies=%s steps=%s stop=%s",
        phase.body_count,
        len(run.phases) - 1,
        run.stop_reason.value,
    )
    return run


def _closest_pair(phase: PhaseState) -> Tuple[int, int]:
    dist = _separations(phase)
    np.fill_diagonal(dist, np.inf)
    i, k = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return int(min(i, k)), int(max(i, k))


def translate(phase: PhaseState, c0: ArrayLike, c1: ArrayLike, t: float = 0.0) -> PhaseState:
    """Galilean shift x + c1 t + c0, v + c1; commutes with nbody_step up to the clock."""
    c0 = np.asarray(c0, dtype=float).reshape(3)
    c1 = np.asarray(c1, dtype=float).reshape(3)
    return phase.replace(positions=phase.positions + c1 * t + c0, velocities=phase.velocities + c1)


def embedding_kernel(phase: PhaseState) -> Kernel:
    """rho(s) = (M - 1) G s^-3 on the complete graph with M vertices."""
    return Kernel.clamped_power(c=(_integer_masses(phase).sum() - 1) * phase.G, alpha=3.0, cap_at_one=False)


def _integer_masses(phase: PhaseState) -> np.ndarray:
    rounded = np.rint(phase.masses)
    if not np.allclose(phase.masses, rounded, rtol=0.0, atol=1e-12):
        raise DomainError("Cluster embedding needs integer masses.")
    if rounded.sum() < 2:
        raise DomainError("Cluster embedding needs a total mass of at least 2.")
    return rounded.astype(int)


def embed_as_opinion_state(phase: PhaseState) -> Tuple[OpinionState, Kernel, np.ndarray]:
    """
    Body k becomes a cluster of m_k coincident vertices. Returns the state,
    the embedding kernel and the body index of every vertex.
    """
    counts = _integer_masses(phase)
    owner = np.repeat(np.arange(phase.body_count), counts)
    return OpinionState(phase.positions[owner]), embedding_kernel(phase), owner


def embedded_acceleration(phase: PhaseState) -> np.ndarray:
    """L_mu x on the embedded graph, one row per body."""
    _check_distinct(phase, _separations(phase))
    state, kernel, owner = embed_as_opinion_state(phase)
    lx = apply_L(state, InfluenceModel.standard(kernel))
    first = np.searchsorted(owner, np.arange(phase.body_count))
    return lx[first]
