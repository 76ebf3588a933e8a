import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.bounds.certificates import CertificateStatus, check_poincare, verify_trajectory_certificates
from src.dynamics.discrete import evolve_discrete, time_one_map
from src.dynamics.model import InfluenceModel, RankKernel, apply_L
from src.kernels.kernel import Kernel
from src.state import OpinionState, entropy, renyi_entropy, variance, weighted_energy

seeds = st.integers(min_value=0, max_value=2**32 - 1)

BOUNDED_KERNELS = (
    Kernel.constant(0.6),
    Kernel.clamped_power(1.0, 1.0, cap_at_one=True),
    Kernel.clamped_power(0.5, 1.5, cap_at_one=True),
    Kernel.shifted_power(2.0),
    Kernel.table([(0.0, 1.0), (0.5, 0.8), (2.0, 0.1)]),
)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.integers(2, 20), n=st.integers(1, 4), a=st.floats(0.05, 1.0))
def test_constant_kernel_gradient_decays_exponentially(seed, d, n, a):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.normal(size=(d + 1, n)))
    traj = evolve_discrete(state, InfluenceModel.standard(Kernel.constant(a)), 50)
    report = verify_trajectory_certificates(traj, enabled=["gradient_contraction_sharp", "average_conservation"])
    assert report.get("gradient_contraction_sharp").status == CertificateStatus.PASS
    assert report.get("average_conservation").status == CertificateStatus.PASS


@settings(max_examples=20, deadline=None)
@given(seed=seeds, d=st.integers(2, 8))
def test_clamped_kernel_gradient_decays_with_measured_lower_bound(seed, d):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.uniform(-3.0, 3.0, size=(d + 1, 2)))
    model = InfluenceModel.standard(Kernel.clamped_power(1.0, 1.0, cap_at_one=True))
    report = verify_trajectory_certificates(evolve_discrete(state, model, 30))
    assert report.get("gradient_contraction_sharp").status == CertificateStatus.PASS
    assert report.get("max_min_monotone").status == CertificateStatus.PASS


def test_normalized_weights_skip_average_conservation():
    state = OpinionState([0.0, 1.0, 5.0, 6.0])
    traj = evolve_discrete(state, InfluenceModel.normalized(Kernel.constant(0.7)), 4)
    report = verify_trajectory_certificates(traj)
    assert report.get("average_conservation").status == CertificateStatus.NOT_APPLICABLE


@settings(max_examples=60, deadline=None)
@given(seed=seeds, size=st.integers(3, 8), n=st.integers(1, 3), which=st.integers(0, len(BOUNDED_KERNELS) - 1))
def test_discrete_variance_identity(seed, size, n, which):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.uniform(-2.0, 2.0, size=(size, n)))
    model = InfluenceModel.standard(BOUNDED_KERNELS[which])
    step = time_one_map(state, model)
    lhs = size * (variance(step) - variance(state))
    energy = weighted_energy(state, model.kernel.values)
    lu = apply_L(state, model)
    rhs = -2.0 * energy + float(np.sum(lu**2))
    scale = size * variance(state) + 2.0 * energy + float(np.sum(lu**2))
    assert abs(lhs - rhs) <= 1e-10 * scale + 1e-300


@settings(max_examples=60, deadline=None)
@given(seed=seeds, size=st.integers(3, 8), which=st.integers(0, len(BOUNDED_KERNELS) - 1))
def test_entropy_strictly_increases_on_nonconstant_states(seed, size, which):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.uniform(0.1, 5.0, size=size))
    step = time_one_map(state, InfluenceModel.standard(BOUNDED_KERNELS[which]))
    before, after = entropy(state), entropy(step)
    # every kernel here is positive, so a nonconstant state strictly gains entropy
    assert after > before
    for order in (0.5, 2.0, 5.0):
        r0, r1 = renyi_entropy(state, order), renyi_entropy(step, order)
        assert r1 >= r0 - 1e-12 * (1.0 + abs(r0))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, size=st.integers(2, 9), alpha=st.sampled_from([0.0, 0.5, 1.0, 1.5]))
def test_poincare_both_branches(seed, size, alpha):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.normal(scale=rng.uniform(0.01, 10.0), size=size))
    assert check_poincare(state, alpha).status == CertificateStatus.PASS


@settings(max_examples=20, deadline=None)
@given(seed=seeds, d=st.integers(2, 8), n=st.integers(1, 3))
def test_rank_dependent_decay(seed, d, n):
    rng = np.random.default_rng(seed)
    state = OpinionState(rng.uniform(-1.0, 1.0, size=(d + 1, n)))
    shifted = Kernel.shifted_power(1.0)
    model = InfluenceModel.rank_dependent(RankKernel.product(shifted, shifted))
    report = verify_trajectory_certificates(evolve_discrete(state, model, 50), enabled=["gradient_contraction_rank"])
    assert report.get("gradient_contraction_rank").status == CertificateStatus.PASS


def test_tightness_witness_halves_every_step():
    traj = evolve_discrete(OpinionState([0.0, 0.0, 3.0]), InfluenceModel.standard(Kernel.constant(1.0)), 6)
    osc = traj.series("osc")
    assert osc[1:] / osc[:-1] == pytest.approx(np.full(6, 0.5), abs=1e-12)


@pytest.mark.parametrize("kernel", BOUNDED_KERNELS)
def test_constant_states_keep_their_entropy(kernel):
    state = OpinionState([1.5, 1.5, 1.5, 1.5])
    step = time_one_map(state, InfluenceModel.standard(kernel))
    assert entropy(step) == entropy(state)
    assert renyi_entropy(step, 2.0) == renyi_entropy(state, 2.0)
