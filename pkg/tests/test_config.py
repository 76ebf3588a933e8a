import json

import numpy as np
import pytest

from src.core.errors import ConfigError
from src.dynamics.model import InfluenceVariant
from src.experiment import build_initial_state, build_model, run_experiment
from src.kernels.kernel import KernelKind
from src.models.experiment_config import (
    CsvInitial,
    RandomInitial,
    load_experiment_config,
    load_nbody_config,
    parse_experiment_config,
)

MINIMAL = {
    "d": 2,
    "n": 1,
    "initial": [[0.0], [0.0], [3.0]],
    "model": {"kernel": {"type": "constant", "p": 1.0}},
    "mode": {"type": "discrete", "steps": 5},
}


def test_minimal_config_parses():
    config = parse_experiment_config(MINIMAL)
    assert config.seed == 0
    assert config.mode.steps == 5
    assert build_model(config.model).variant == InfluenceVariant.STANDARD
    assert len(config.enabled_certificates()) > 20


def test_missing_kernel_names_the_field():
    data = {**MINIMAL, "model": {}}
    with pytest.raises(ConfigError, match="model.kernel"):
        parse_experiment_config(data)


def test_kernel_parameters_are_required_per_type():
    data = {**MINIMAL, "model": {"kernel": {"type": "clamped_power", "alpha": 1.0}}}
    with pytest.raises(ConfigError, match="needs c"):
        parse_experiment_config(data)


def test_unknown_fields_and_certificates_are_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse_experiment_config({**MINIMAL, "colour": "red"})
    with pytest.raises(ConfigError, match="unknown certificates"):
        parse_experiment_config({**MINIMAL, "certificates": {"made_up": True}})


def test_initial_shape_must_match_d_and_n():
    with pytest.raises(ConfigError, match="rows"):
        parse_experiment_config({**MINIMAL, "d": 3})
    with pytest.raises(ConfigError, match="entries"):
        parse_experiment_config({**MINIMAL, "n": 2})


def test_rank_kernel_only_with_rank_variant():
    rank = {"rank": {"type": "constant", "p": 1.0}, "distance": {"type": "constant", "p": 0.5}}
    model = {"kernel": {"type": "constant", "p": 0.5}, "rank_kernel": rank}
    with pytest.raises(ConfigError, match="rank_kernel"):
        parse_experiment_config({**MINIMAL, "model": model})
    config = parse_experiment_config({**MINIMAL, "model": {**model, "variant": "rank_dependent"}})
    assert build_model(config.model).variant == InfluenceVariant.RANK_DEPENDENT


def test_clamped_power_is_capped_unless_told_otherwise():
    data = {**MINIMAL, "model": {"kernel": {"type": "clamped_power", "c": 1.0, "alpha": 1.0}}}
    kernel = build_model(parse_experiment_config(data).model).kernel
    assert kernel.kind == KernelKind.CLAMPED_POWER
    assert kernel.cap_at_one


def test_random_initial_state_is_seeded():
    data = {**MINIMAL, "initial": {"type": "uniform", "low": -1.0, "high": 1.0}, "seed": 7}
    config = parse_experiment_config(data)
    assert isinstance(config.initial, RandomInitial)
    first = build_initial_state(config, np.random.default_rng(7))
    second = build_initial_state(config, np.random.default_rng(7))
    assert np.array_equal(first.values, second.values)
    assert first.values.shape == (3, 1)


def test_csv_initial_and_knots_resolve_relative_to_config(tmp_path):
    (tmp_path / "start.csv").write_text("u0\n0\n1\n5\n")
    (tmp_path / "knots.csv").write_text("0,1\n1,1\n4,0.25\n")
    data = {
        **MINIMAL,
        "initial": {"type": "csv", "path": "start.csv"},
        "model": {"kernel": {"type": "table", "knots_csv": "knots.csv"}},
    }
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data))
    config = load_experiment_config(str(path))
    assert isinstance(config.initial, CsvInitial)
    state = build_initial_state(config, np.random.default_rng(0))
    assert state.values[:, 0].tolist() == [0.0, 1.0, 5.0]
    kernel = build_model(config.model).kernel
    assert kernel.knots[-1] == (4.0, 0.25)


def test_missing_referenced_file(tmp_path):
    data = {**MINIMAL, "initial": {"type": "csv", "path": "nowhere.csv"}}
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match="initial.path"):
        load_experiment_config(str(path))


def test_bad_json_reports_the_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "d": 2,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_experiment_config(str(path))
    with pytest.raises(ConfigError, match="not found"):
        load_experiment_config(str(tmp_path / "absent.json"))


def test_same_seed_gives_same_run():
    data = {**MINIMAL, "initial": {"type": "normal", "loc": 1.0, "scale": 2.0}, "seed": 42}
    first = run_experiment(parse_experiment_config(data))
    second = run_experiment(parse_experiment_config(data))
    assert np.array_equal(first.trajectory.final_state.values, second.trajectory.final_state.values)
    assert first.run_id != second.run_id


def test_nbody_config_needs_exactly_one_source(tmp_path):
    path = tmp_path / "nbody.json"
    path.write_text(json.dumps({"steps": 3}))
    with pytest.raises(ConfigError, match="exactly one"):
        load_nbody_config(str(path))
    path.write_text(json.dumps({"steps": 3, "bodies": [[1, -1, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0, 0]]}))
    config = load_nbody_config(str(path))
    assert config.substep == 1.0
    assert len(config.bodies) == 2
