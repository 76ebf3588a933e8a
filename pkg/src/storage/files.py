from __future__ import annotations

import glob
import json
import logging
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from src.audit.logger import RunEvent, read_run_event
from src.core.errors import AppError, StorageError
from src.dynamics.trajectory import EvolutionMode, StopReason, Trajectory
from src.experiment import NBODY_COLUMNS, model_from_spec
from src.nbody import NBodyDiagnostics, PhaseState
from src.state import OpinionState

logger = logging.getLogger(__name__)

STATES_DIR = "states"
MIDPOINTS_DIR = "midpoints"
PHASES_DIR = "phases"
DIAGNOSTICS_FILE = "diagnostics.jsonl"
FLOAT_FORMAT = "%.17g"


def _header(n: int) -> str:
    return ",".join(f"u{k}" for k in range(n))


def write_state_csv(state: OpinionState, path: str) -> None:
    """One row per vertex; %.17g round-trips every float64 exactly."""
    np.savetxt(path, state.values, fmt=FLOAT_FORMAT, delimiter=",", header=_header(state.n), comments="")


def read_state_csv(path: str) -> OpinionState:
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return OpinionState(values)
    except (OSError, ValueError) as exc:
        raise StorageError(f"Corrupt state file {path}: {exc}") from exc


def _write_jsonl(records: Iterable[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def _write_series(states: Sequence[OpinionState], directory: str, prefix: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for k, state in enumerate(states):
        write_state_csv(state, os.path.join(directory, f"{prefix}_{k:05d}.csv"))


def write_trajectory(trajectory: Trajectory, run_dir: str) -> List[str]:
    """states/state_XXXXX.csv per sample, midpoints/ when kept, and diagnostics.jsonl."""
    try:
        _write_series(trajectory.states, os.path.join(run_dir, STATES_DIR), "state")
        if trajectory.midpoints:
            _write_series(trajectory.midpoints, os.path.join(run_dir, MIDPOINTS_DIR), "mid")
        _write_jsonl((rec.to_dict() for rec in trajectory.diagnostics), os.path.join(run_dir, DIAGNOSTICS_FILE))
    except OSError as exc:
        raise StorageError(f"Could not write trajectory to {run_dir}: {exc}") from exc
    logger.info("trajectory_written dir=%s samples=%s", run_dir, len(trajectory))
    return sorted(glob.glob(os.path.join(run_dir, STATES_DIR, "*.csv")))


def _read_series(directory: str, prefix: str) -> List[OpinionState]:
    paths = sorted(glob.glob(os.path.join(directory, f"{prefix}_*.csv")))
    return [read_state_csv(p) for p in paths]


def trajectory_event_fields(trajectory: Trajectory) -> dict:
    """The RunEvent fields read_trajectory needs."""
    return {
        "model": trajectory.model.to_spec(),
        "mode": trajectory.mode.value,
        "times": [float(t) for t in trajectory.times],
        "stride": trajectory.stride,
        "stop_reason": trajectory.stop_reason.value,
        "integrator_meta": trajectory.integrator_meta,
        "has_midpoints": bool(trajectory.midpoints),
    }


def read_trajectory(run_dir: str, event: Optional[RunEvent] = None) -> Trajectory:
    """Rebuild the Trajectory of a run directory; any missing or corrupt file is a StorageError."""
    if not os.path.isdir(run_dir):
        raise StorageError(f"Run directory not found: {run_dir}")
    if event is None:
        event = read_run_event(run_dir)
    if event.model is None or event.mode is None:
        raise StorageError(f"{run_dir} holds no trajectory (command={event.command}).")

    states = _read_series(os.path.join(run_dir, STATES_DIR), "state")
    if len(states) != len(event.times):
        raise StorageError(f"{run_dir}: {len(states)} state files for {len(event.times)} recorded times.")
    midpoints: List[OpinionState] = []
    if event.has_midpoints:
        midpoints = _read_series(os.path.join(run_dir, MIDPOINTS_DIR), "mid")
    try:
        mode = EvolutionMode(event.mode)
        times = [int(t) for t in event.times] if mode == EvolutionMode.DISCRETE else list(event.times)
        return Trajectory.from_states(
            mode,
            times,
            states,
            model_from_spec(event.model),
            integrator_meta=event.integrator_meta,
            stop_reason=StopReason(event.stop_reason),
            stride=event.stride,
            midpoints=tuple(midpoints),
        )
    except (AppError, ValueError) as exc:
        message = exc.message if isinstance(exc, AppError) else str(exc)
        raise StorageError(f"{run_dir}: {message}") from exc


def write_phase_csv(phase: PhaseState, path: str) -> None:
    table = np.column_stack([phase.masses, phase.positions, phase.velocities])
    np.savetxt(path, table, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(NBODY_COLUMNS), comments="")


def write_nbody_run(phases: Sequence[PhaseState], diagnostics: Sequence[NBodyDiagnostics], run_dir: str) -> None:
    try:
        directory = os.path.join(run_dir, PHASES_DIR)
        os.makedirs(directory, exist_ok=True)
        for k, phase in enumerate(phases):
            write_phase_csv(phase, os.path.join(directory, f"phase_{k:05d}.csv"))
        _write_jsonl((d.to_dict() for d in diagnostics), os.path.join(run_dir, DIAGNOSTICS_FILE))
    except OSError as exc:
        raise StorageError(f"Could not write n-body run to {run_dir}: {exc}") from exc
    logger.info("nbody_written dir=%s samples=%s", run_dir, len(phases))
