from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, Optional

import numpy as np
from pydantic import ValidationError

from src.core.errors import ConfigError, StorageError
from src.dynamics.continuous import evolve_continuous
from src.dynamics.discrete import evolve_discrete
from src.dynamics.model import InfluenceModel, RankKernel
from src.dynamics.trajectory import Trajectory
from src.kernels.kernel import Kernel
from src.models.experiment_config import (
    ContinuousMode,
    CsvInitial,
    ExperimentConfig,
    KernelSpec,
    ModelSpec,
    NBodyConfig,
    RandomInitial,
    format_validation_error,
)
from src.nbody import NBodyRun, PhaseState, nbody_evolve
from src.state import OpinionState

logger = logging.getLogger(__name__)

NBODY_COLUMNS = ("m", "x", "y", "z", "vx", "vy", "vz")


def _read_csv_matrix(path: str, header: bool) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        raise StorageError(f"Could not read {path}: {exc}") from exc


def _has_header(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    try:
        [float(cell) for cell in first.split(",")]
    except ValueError:
        return True
    return False


def build_kernel(spec: KernelSpec) -> Kernel:
    cap = spec.cap_at_one
    if spec.type == "constant":
        return Kernel.constant(spec.p, cap_at_one=bool(cap))
    if spec.type == "power":
        return Kernel.power(spec.alpha, cap_at_one=bool(cap))
    if spec.type == "clamped_power":
        return Kernel.clamped_power(spec.c, spec.alpha, cap_at_one=True if cap is None else cap)
    if spec.type == "shifted_power":
        return Kernel.shifted_power(spec.alpha)
    knots = spec.knots
    if knots is None:
        table = _read_csv_matrix(spec.knots_csv, header=_has_header(spec.knots_csv))
        if table.shape[1] != 2:
            raise ConfigError(f"{spec.knots_csv}: knots CSV needs two columns (s, rho), got {table.shape[1]}")
        knots = [tuple(row) for row in table]
    return Kernel.table(knots, cap_at_one=bool(cap))


def build_model(spec: ModelSpec) -> InfluenceModel:
    kernel = build_kernel(spec.kernel)
    if spec.variant == "normalized":
        return InfluenceModel.normalized(kernel)
    if spec.variant == "rank_dependent":
        rank = RankKernel.product(build_kernel(spec.rank_kernel.rank), build_kernel(spec.rank_kernel.distance))
        return InfluenceModel.rank_dependent(rank, kernel=kernel)
    return InfluenceModel.standard(kernel)


def model_from_spec(data: Dict[str, Any]) -> InfluenceModel:
    """Rebuild a model from InfluenceModel.to_spec() output."""
    try:
        spec = ModelSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc
    return build_model(spec)


def build_initial_state(config: ExperimentConfig, rng: np.random.Generator) -> OpinionState:
    shape = (config.d + 1, config.n)
    initial = config.initial
    if isinstance(initial, list):
        return OpinionState(np.asarray(initial, dtype=float))
    if isinstance(initial, RandomInitial):
        if initial.type == "uniform":
            return OpinionState(rng.uniform(initial.low, initial.high, size=shape))
        return OpinionState(rng.normal(initial.loc, initial.scale, size=shape))
    assert isinstance(initial, CsvInitial)
    values = _read_csv_matrix(initial.path, header=_has_header(initial.path))
    if values.shape != shape:
        raise ConfigError(f"initial.path: expected a {shape[0]} x {shape[1]} table, got {values.shape}")
    return OpinionState(values)


@dataclass
class ExperimentRun:
    run_id: str
    created_at: str
    seed: int
    config: Dict[str, Any]
    trajectory: Trajectory

    def summary(self) -> Dict[str, Any]:
        traj = self.trajectory
        return {
            "run_id": self.run_id,
            "mode": traj.mode.value,
            "samples": len(traj),
            "t_final": float(traj.times[-1]),
            "stop_reason": traj.stop_reason.value,
            "osc_final": traj.diagnostics[-1].osc,
        }


def _new_run_id(prefix: str) -> str:
    return f"{prefix}_{uuid.uuid4().hex[:12]}"


def run_experiment(config: ExperimentConfig) -> ExperimentRun:
    """Seeded initial state, model and evolution; everything random flows through one generator."""
    rng = np.random.default_rng(config.seed)
    state = build_initial_state(config, rng)
    model = build_model(config.model)
    mode = config.mode
    if isinstance(mode, ContinuousMode):
        trajectory = evolve_continuous(
            state,
            model,
            mode.t_end,
            tol=mode.tol,
            max_step=mode.max_step,
            stride=config.stride,
            max_steps=mode.max_steps,
        )
    else:
        trajectory = evolve_discrete(state, model, mode.steps, stride=config.stride)
    run = ExperimentRun(
        run_id=_new_run_id("run"),
        created_at=datetime.now(timezone.utc).isoformat(),
        seed=config.seed,
        config=config.model_dump(mode="json"),
        trajectory=trajectory,
    )
    logger.info("experiment_complete run_id=%s %s", run.run_id, run.summary())
    return run


def build_phase_state(config: NBodyConfig) -> PhaseState:
    if config.bodies is not None:
        table = np.asarray(config.bodies, dtype=float)
    else:
        table = _read_csv_matrix(config.bodies_csv, header=_has_header(config.bodies_csv))
    if table.ndim != 2 or table.shape[1] != len(NBODY_COLUMNS):
        raise ConfigError(f"bodies need columns {', '.join(NBODY_COLUMNS)}, got shape {table.shape}")
    return PhaseState(positions=table[:, 1:4], velocities=table[:, 4:7], masses=table[:, 0], G=config.G)


def run_nbody(config: NBodyConfig, phase: Optional[PhaseState] = None) -> NBodyRun:
    if phase is None:
        phase = build_phase_state(config)
    return nbody_evolve(phase, config.steps, substep=config.substep)
