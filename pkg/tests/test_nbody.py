import itertools
import math

import numpy as np
import pytest

from src.core.errors import DomainError, SingularityError
from src.nbody import (
    NBodyStopReason,
    PhaseState,
    embedded_acceleration,
    nbody_acceleration,
    nbody_diagnostics,
    nbody_evolve,
    nbody_step,
    nbody_time_one,
    translate,
)


def pair(velocities=None, G=1.0):
    positions = [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    return PhaseState(positions, velocities if velocities is not None else np.zeros((2, 3)), [1.0, 1.0], G=G)


def test_two_body_acceleration():
    accel = nbody_acceleration(pair())
    assert accel[0] == pytest.approx([0.25, 0.0, 0.0])
    assert accel[1] == pytest.approx([-0.25, 0.0, 0.0])


def test_acceleration_edge_cases():
    single = PhaseState([[1.0, 2.0, 3.0]], [[0.0, 0.0, 0.0]], [2.0])
    assert np.all(nbody_acceleration(single) == 0.0)
    clash = PhaseState([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], np.zeros((2, 3)), [1.0, 1.0])
    with pytest.raises(SingularityError):
        nbody_acceleration(clash)


def test_point_reflection_gives_antisymmetric_accelerations():
    x = np.array([[1.0, 0.5, -0.2], [0.3, -1.0, 0.7]])
    phase = PhaseState(np.vstack([x, -x]), np.zeros((4, 3)), [1.0, 2.0, 1.0, 2.0])
    accel = nbody_acceleration(phase)
    assert accel[:2] == pytest.approx(-accel[2:])


def test_time_one_map_from_rest():
    after = nbody_time_one(pair())
    assert after.positions == pytest.approx(pair().positions)
    assert after.velocities[0] == pytest.approx([0.25, 0.0, 0.0])
    assert after.velocities[1] == pytest.approx([-0.25, 0.0, 0.0])


def test_weak_coupling_is_free_streaming():
    v = np.array([[0.1, 0.0, 0.0], [0.0, 0.2, 0.0]])
    after = nbody_step(pair(v, G=1e-300))
    assert after.positions == pytest.approx(pair(v).positions + v)


def test_step_validates_substep():
    with pytest.raises(DomainError):
        nbody_step(pair(), 0.0)
    with pytest.raises(DomainError):
        nbody_step(pair(), 1.5)


def test_diagnostics_examples():
    diag = nbody_diagnostics(pair())
    assert diag.moment_of_inertia == pytest.approx(2.0)
    assert diag.potential == pytest.approx(0.5)

    h = math.sqrt(3.0) / 2.0
    triangle = PhaseState([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]], np.zeros((3, 3)), [1.0, 1.0, 1.0])
    diag = nbody_diagnostics(triangle)
    assert diag.moment_of_inertia == pytest.approx(1.0)
    assert diag.potential == pytest.approx(3.0)

    scaled = PhaseState(3.0 * triangle.positions, triangle.velocities, triangle.masses)
    assert nbody_diagnostics(scaled).moment_of_inertia == pytest.approx(9.0)
    assert nbody_diagnostics(scaled).potential == pytest.approx(1.0)


def test_substep_one_matches_iterated_time_one_map():
    v = np.array([[0.0, 0.3, 0.0], [0.0, -0.3, 0.0]])
    run = nbody_evolve(pair(v), 3, substep=1.0)
    manual = pair(v)
    for _ in range(3):
        manual = nbody_time_one(manual)
    assert np.array_equal(run.final_phase.positions, manual.positions)
    assert np.array_equal(run.final_phase.velocities, manual.velocities)


def test_centered_system_stays_centered():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 3))
    v = rng.normal(scale=0.1, size=(4, 3))
    m = np.array([1.0, 2.0, 1.5, 0.5])
    x -= (m @ x) / m.sum()
    v -= (m @ v) / m.sum()
    run = nbody_evolve(PhaseState(x, v, m), 100, substep=0.01)
    for diag in run.diagnostics:
        assert np.abs(diag.total_weighted_position).max() < 1e-12
        assert np.abs(diag.total_momentum).max() < 1e-12


def test_symmetric_collapse_keeps_center_and_momentum_at_zero():
    run = nbody_evolve(pair(), 200, substep=0.1)
    assert len(run.phases) >= 2
    for diag in run.diagnostics:
        assert np.abs(diag.total_weighted_position).max() < 1e-12
        assert np.abs(diag.total_momentum).max() < 1e-12


def test_circular_orbit_radius_drift_over_one_period():
    v = np.array([[0.0, -0.5, 0.0], [0.0, 0.5, 0.0]])
    substep = 1e-3
    steps = int(round(4.0 * math.pi / substep))
    run = nbody_evolve(pair(v), steps, substep=substep)
    assert run.stop_reason == NBodyStopReason.COMPLETED
    separations = [np.linalg.norm(p.positions[1] - p.positions[0]) for p in run.phases]
    assert max(abs(s / 2.0 - 1.0) for s in separations) < 0.01


def test_translation_commutes_with_the_map():
    v = np.array([[0.0, 0.2, 0.1], [0.1, -0.2, 0.0]])
    c0, c1 = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.0, -0.1])
    shifted_then_step = nbody_step(translate(pair(v), c0, c1))
    step_then_shifted = translate(nbody_step(pair(v)), c0, c1, t=1.0)
    assert shifted_then_step.positions == pytest.approx(step_then_shifted.positions)
    assert shifted_then_step.velocities == pytest.approx(step_then_shifted.velocities)


def test_embedding_reproduces_newtonian_acceleration():
    bodies = np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.0], [-0.5, 1.0, 2.0]])
    for count in (1, 2, 3):
        for masses in itertools.product((1.0, 2.0, 3.0), repeat=count):
            if sum(masses) < 2:
                continue
            phase = PhaseState(bodies[:count], np.zeros((count, 3)), masses, G=0.7)
            assert np.abs(embedded_acceleration(phase) - nbody_acceleration(phase)).max() < 1e-12


def test_embedding_needs_integer_masses():
    phase = PhaseState([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], np.zeros((2, 3)), [1.5, 1.0])
    with pytest.raises(DomainError):
        embedded_acceleration(phase)
