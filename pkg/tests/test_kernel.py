import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.core.errors import DomainError, UnsupportedKernelError
from src.kernels.assumptions import check_kernel_assumptions
from src.kernels.kernel import (
    Kernel,
    eval_kernel,
    formal_sigma_inverse_square,
    sigma_by_quadrature,
    sigma_from_rho,
    sigma_values,
    weighted_difference,
)


def test_eval_kernel_examples():
    assert eval_kernel(Kernel.constant(0.5), 7.0) == 0.5
    assert eval_kernel(Kernel.power(1.0), 3.0) == pytest.approx(1.0 / 3.0)
    assert eval_kernel(Kernel.clamped_power(1.0, 1.0, cap_at_one=True), 0.5) == 1.0


def test_eval_kernel_rejects_negative_distance():
    with pytest.raises(DomainError):
        eval_kernel(Kernel.constant(1.0), -1.0)


def test_power_kernel_is_infinite_at_zero():
    assert math.isinf(eval_kernel(Kernel.power(1.0), 0.0))


def test_shifted_power_is_bounded_by_one():
    kernel = Kernel.shifted_power(2.0)
    assert kernel.bounded_by_one
    assert eval_kernel(kernel, 0.0) == 1.0
    assert eval_kernel(kernel, 1.0) == pytest.approx(0.25)


def test_table_kernel_interpolates_and_extrapolates_flat():
    kernel = Kernel.table([(0.0, 1.0), (1.0, 1.0), (3.0, 0.0)])
    assert eval_kernel(kernel, 2.0) == pytest.approx(0.5)
    assert eval_kernel(kernel, 10.0) == 0.0
    assert kernel.breakpoints == (0.0, 1.0, 3.0)


def test_table_kernel_rejects_unsorted_knots():
    with pytest.raises(DomainError):
        Kernel.table([(1.0, 1.0), (0.5, 1.0)])


def test_bounded_by_one():
    assert Kernel.constant(1.0).bounded_by_one
    assert not Kernel.constant(1.5).bounded_by_one
    assert Kernel.constant(1.5, cap_at_one=True).bounded_by_one
    assert not Kernel.power(1.0).bounded_by_one


def test_weighted_difference_skips_zero_vectors_for_singular_kernels():
    out = weighted_difference(Kernel.power(1.0), [[0.0], [2.0]])
    assert out[0, 0] == 0.0
    assert out[1, 0] == pytest.approx(1.0)


def test_sigma_examples():
    assert sigma_from_rho(Kernel.constant(0.3), 5.0) == pytest.approx(0.3)
    assert sigma_from_rho(Kernel.power(1.0), 2.0) == pytest.approx(1.0)
    capped = Kernel.clamped_power(1.0, 1.0, cap_at_one=True)
    assert sigma_from_rho(capped, 2.0) == pytest.approx(0.75)
    assert sigma_by_quadrature(capped, 2.0) == pytest.approx(0.75, rel=1e-9)


def test_sigma_of_table_matches_quadrature():
    kernel = Kernel.table([(0.0, 1.0), (1.0, 1.0), (2.0, 0.5), (4.0, 0.1)])
    for s in (0.5, 1.5, 3.0, 6.0):
        assert sigma_from_rho(kernel, s) == pytest.approx(sigma_by_quadrature(kernel, s), rel=1e-9)


def test_sigma_of_shifted_power_matches_quadrature():
    for alpha in (0.5, 1.0, 2.0, 3.0):
        kernel = Kernel.shifted_power(alpha)
        assert sigma_from_rho(kernel, 2.5) == pytest.approx(sigma_by_quadrature(kernel, 2.5), rel=1e-9)


def test_sigma_diverges_for_inverse_square():
    with pytest.raises(UnsupportedKernelError):
        sigma_values(Kernel.power(2.0), [1.0])
    assert formal_sigma_inverse_square([1.0])[0] == 0.0


def test_sigma_needs_positive_argument():
    with pytest.raises(DomainError):
        sigma_from_rho(Kernel.constant(1.0), 0.0)


@settings(max_examples=30, deadline=None)
@given(
    alpha=st.floats(min_value=0.1, max_value=1.9),
    s=st.floats(min_value=0.05, max_value=20.0),
)
def test_sigma_dominates_rho_for_nonincreasing_kernels(alpha, s):
    kernel = Kernel.clamped_power(1.0, alpha, cap_at_one=True)
    assert sigma_from_rho(kernel, s) >= float(kernel.values(s)) * (1 - 1e-12)


def test_check_constant_kernel():
    report = check_kernel_assumptions(Kernel.constant(0.4), 0.0, 10.0, 200)
    assert report.is_nonincreasing
    assert report.lower_bound_a == pytest.approx(0.4)
    assert not report.linear_decay_ok
    assert report.range_ok


def test_check_power_kernel_on_tail():
    report = check_kernel_assumptions(Kernel.power(1.0), 1.0, 100.0, 500)
    assert report.linear_decay_ok
    assert report.derivative_constant_C == pytest.approx(1.0)


def test_check_detects_increasing_kernel():
    kernel = Kernel.table([(0.0, 0.1), (1.0, 0.9)])
    report = check_kernel_assumptions(kernel, 0.0, 2.0, 50)
    assert not report.is_nonincreasing


def test_check_kernel_preconditions():
    with pytest.raises(DomainError):
        check_kernel_assumptions(Kernel.constant(1.0), 2.0, 1.0, 10)
    with pytest.raises(DomainError):
        check_kernel_assumptions(Kernel.constant(1.0), 0.0, 1.0, 1)


def test_to_spec_round_trips_parameters():
    spec = Kernel.clamped_power(2.0, 0.5, cap_at_one=False).to_spec()
    assert spec == {"type": "clamped_power", "cap_at_one": False, "c": 2.0, "alpha": 0.5}
    assert np.isclose(Kernel.table([(0, 1), (1, 0.5)]).to_spec()["knots"][1][1], 0.5)
