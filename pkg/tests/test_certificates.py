import math

import numpy as np
import pytest

from src.bounds.certificates import (
    CERTIFICATE_NAMES,
    CertificateStatus,
    check_poincare,
    check_three_circles,
    verify_trajectory_certificates,
)
from src.bounds.evaluators import consensus_time_bound
from src.core.errors import DomainError
from src.dynamics.continuous import evolve_continuous
from src.dynamics.discrete import evolve_discrete
from src.dynamics.model import InfluenceModel
from src.dynamics.trajectory import EvolutionMode, StopReason, Trajectory
from src.kernels.kernel import Kernel
from src.state import OpinionState, variance

U = OpinionState([0.0, 0.0, 3.0])
ONE = InfluenceModel.standard(Kernel.constant(1.0))
CONTINUOUS_ONLY = (
    "entropy_derivative_sign",
    "energy_identity_continuous",
    "sigma_energy_identity",
    "power_energy_identity",
    "variance_rate",
    "three_circles",
)


def test_check_poincare_examples():
    flat = check_poincare(U, 0.0, kernel=Kernel.constant(1.0))
    assert flat.status == CertificateStatus.PASS
    assert flat.measured == pytest.approx(6.0)
    assert flat.bound == pytest.approx(8.0)
    assert flat.margin == pytest.approx(2.0)

    inverse = check_poincare(U, 1.0)
    assert inverse.status == CertificateStatus.PASS
    assert inverse.measured == pytest.approx(math.sqrt(6.0))
    assert inverse.bound == pytest.approx(4.0)

    constant = check_poincare(OpinionState([2.0, 2.0, 2.0]), 1.0)
    assert constant.status == CertificateStatus.PASS
    assert constant.measured == 0.0


def test_check_poincare_domain():
    with pytest.raises(DomainError):
        check_poincare(U, 2.0)
    vector = check_poincare(OpinionState([[0.0, 1.0], [1.0, 0.0]]), 0.0)
    assert vector.status == CertificateStatus.NOT_APPLICABLE


def test_three_circles_affine_holds_with_equality():
    t = np.linspace(0.0, 4.0, 9)
    entry = check_three_circles(t, 10.0 - 2.0 * t, 1.0, 3.0)
    assert entry.status == CertificateStatus.PASS
    assert entry.margin == pytest.approx(0.0, abs=1e-12)


def test_three_circles_convex_passes_concave_fails():
    t = np.linspace(0.0, 2.0, 201)
    assert check_three_circles(t, np.exp(-t), 0.5, 1.0).status == CertificateStatus.PASS
    assert check_three_circles(t, 5.0 - t**2, 0.5, 1.0).status == CertificateStatus.FAIL
    with pytest.raises(DomainError):
        check_three_circles(t, np.exp(-t), 1.0, 0.5)
    with pytest.raises(DomainError):
        check_three_circles(t, np.exp(-t), 0.5, 3.0)


def test_discrete_constant_kernel_run_passes():
    report = verify_trajectory_certificates(evolve_discrete(U, ONE, 5))
    assert report.passed
    assert [e.name for e in report.entries] == list(CERTIFICATE_NAMES)
    for name in ("average_conservation", "gradient_contraction_sharp", "variance_identity", "poincare"):
        assert report.get(name).status == CertificateStatus.PASS
    for name in CONTINUOUS_ONLY:
        assert report.get(name).status == CertificateStatus.NOT_APPLICABLE


def test_shifted_average_fails_conservation():
    traj = evolve_discrete(U, ONE, 5)
    states = list(traj.states)
    states[3] = states[3].shifted([1.0])
    tampered = Trajectory.from_states(EvolutionMode.DISCRETE, traj.times, states, ONE)
    report = verify_trajectory_certificates(tampered)
    assert not report.passed
    assert report.get("average_conservation").status == CertificateStatus.FAIL


def test_entropies_grow_under_discrete_averaging():
    model = InfluenceModel.standard(Kernel.clamped_power(1.0, 1.0, cap_at_one=True))
    report = verify_trajectory_certificates(evolve_discrete(OpinionState([1.0, 1.0, 4.0]), model, 6))
    assert report.get("entropy_monotone").status == CertificateStatus.PASS
    assert report.get("renyi_monotone").status == CertificateStatus.PASS


def test_continuous_inverse_kernel_passes_curve_certificates():
    state = OpinionState([1.0, 2.0, 4.0, 7.0, 11.0])
    traj = evolve_continuous(state, InfluenceModel.standard(Kernel.power(1.0)), 1.0, tol=1e-8)
    report = verify_trajectory_certificates(traj)
    for name in ("three_circles", "variance_rate", "energy_identity_continuous", "power_energy_identity"):
        assert report.get(name).status == CertificateStatus.PASS, name
    assert report.get("average_conservation").status == CertificateStatus.PASS
    assert report.get("gradient_contraction_sharp").status == CertificateStatus.NOT_APPLICABLE
    assert report.passed


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("d", [2, 5, 10])
def test_power_kernel_runs_reach_consensus_within_the_bound(alpha, d):
    state = OpinionState(np.random.default_rng(40 + d).uniform(0.5, 3.0, size=d + 1))
    t_end = 2.0 * consensus_time_bound(variance(state), d, alpha) + 1.0
    traj = evolve_continuous(state, InfluenceModel.standard(Kernel.power(alpha)), t_end, tol=1e-8)
    assert traj.stop_reason == StopReason.CONSENSUS
    report = verify_trajectory_certificates(traj)
    assert report.get("consensus_time").status == CertificateStatus.PASS
    assert report.get("variance_rate").status == CertificateStatus.PASS
    assert report.passed, report.format_table()


@pytest.mark.parametrize("seed", range(20))
def test_energy_identities_and_three_circles_hold(seed):
    rng = np.random.default_rng(seed)
    alpha = (0.5, 1.0, 1.5)[seed % 3]
    state = OpinionState(rng.uniform(0.5, 3.0, size=3 + seed % 4))
    traj = evolve_continuous(state, InfluenceModel.standard(Kernel.power(alpha)), 0.5, tol=1e-8)
    report = verify_trajectory_certificates(traj)
    for name in ("energy_identity_continuous", "sigma_energy_identity", "power_energy_identity", "three_circles"):
        assert report.get(name).status != CertificateStatus.FAIL, name
    assert report.passed, report.format_table()


def test_disabled_and_unknown_certificates():
    traj = evolve_discrete(U, ONE, 2)
    report = verify_trajectory_certificates(traj, enabled=["average_conservation"])
    assert report.get("average_conservation").status == CertificateStatus.PASS
    assert report.get("poincare").detail == "disabled in config"
    with pytest.raises(DomainError):
        verify_trajectory_certificates(traj, enabled=["no_such_check"])


def test_single_sample_is_not_applicable_everywhere():
    report = verify_trajectory_certificates(evolve_discrete(U, ONE, 0))
    assert report.passed
    assert all(e.status == CertificateStatus.NOT_APPLICABLE for e in report.entries)


def test_report_serializes_without_infinities():
    report = verify_trajectory_certificates(evolve_discrete(U, ONE, 3))
    data = report.to_dict()
    assert data["passed"] is True
    assert len(data["entries"]) == len(CERTIFICATE_NAMES)
    assert "result: PASS" in report.format_table()
