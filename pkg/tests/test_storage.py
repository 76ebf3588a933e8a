import json
import os

import numpy as np
import pytest

from src.audit.logger import META_FILE, RunEvent, read_run_event, write_run_event
from src.core.errors import StorageError
from src.dynamics.continuous import evolve_continuous
from src.dynamics.discrete import evolve_discrete
from src.dynamics.model import InfluenceModel
from src.kernels.kernel import Kernel
from src.state import OpinionState
from src.storage.files import (
    DIAGNOSTICS_FILE,
    read_state_csv,
    read_trajectory,
    trajectory_event_fields,
    write_state_csv,
    write_trajectory,
)


def _save(trajectory, run_dir):
    write_trajectory(trajectory, run_dir)
    event = RunEvent(
        event_id="run_test",
        timestamp="2026-01-01T00:00:00+00:00",
        command="simulate",
        seed=0,
        config={},
        **trajectory_event_fields(trajectory),
    )
    write_run_event(event, run_dir)


def test_state_csv_is_exact(tmp_path):
    state = OpinionState([[0.1, 1.0 / 3.0], [-2.5e-17, 7.0]])
    path = str(tmp_path / "state.csv")
    write_state_csv(state, path)
    assert np.array_equal(read_state_csv(path).values, state.values)
    with open(path, encoding="utf-8") as f:
        assert f.readline().strip() == "u0,u1"


def test_discrete_run_directory_layout(tmp_path):
    run_dir = str(tmp_path / "run")
    traj = evolve_discrete(OpinionState([0.0, 0.0, 3.0]), InfluenceModel.standard(Kernel.constant(1.0)), 5)
    _save(traj, run_dir)
    assert len(os.listdir(os.path.join(run_dir, "states"))) == 6
    with open(os.path.join(run_dir, DIAGNOSTICS_FILE), encoding="utf-8") as f:
        osc = [json.loads(line)["osc"] for line in f]
    assert osc[:3] == pytest.approx([3.0, 1.5, 0.75])
    meta = read_run_event(run_dir)
    assert meta.mode == "discrete"
    assert meta.library_version


def test_continuous_trajectory_reads_back(tmp_path):
    run_dir = str(tmp_path / "run")
    model = InfluenceModel.standard(Kernel.power(1.0))
    traj = evolve_continuous(OpinionState([1.0, 2.0, 4.0]), model, 0.3)
    _save(traj, run_dir)
    back = read_trajectory(run_dir)
    assert back.times == traj.times
    assert back.stop_reason == traj.stop_reason
    assert len(back.midpoints) == len(traj.midpoints)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back.states, traj.states))
    assert back.model.to_spec() == model.to_spec()
    assert back.integrator_meta["tol"] == traj.integrator_meta["tol"]


def test_missing_or_truncated_runs_are_storage_errors(tmp_path):
    with pytest.raises(StorageError):
        read_trajectory(str(tmp_path / "nothing"))
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(StorageError, match=META_FILE):
        read_run_event(str(empty))

    run_dir = str(tmp_path / "run")
    traj = evolve_discrete(OpinionState([0.0, 0.0, 3.0]), InfluenceModel.standard(Kernel.constant(1.0)), 3)
    _save(traj, run_dir)
    os.remove(os.path.join(run_dir, "states", "state_00002.csv"))
    with pytest.raises(StorageError, match="state files"):
        read_trajectory(run_dir)


def test_corrupt_state_file(tmp_path):
    path = tmp_path / "state.csv"
    path.write_text("u0\n1.0\nnot-a-number\n")
    with pytest.raises(StorageError):
        read_state_csv(str(path))
