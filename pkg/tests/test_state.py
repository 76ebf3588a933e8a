import math

import numpy as np
import pytest

from src.core.errors import DomainError, InvalidStateError
from src.state import (
    OpinionState,
    average,
    compute_diagnostics,
    entropy,
    grad_sup_norm,
    max_deviation,
    renyi_entropy,
    variance,
    weighted_energy,
)

U = OpinionState([0.0, 0.0, 3.0])


def test_state_shape_and_immutability():
    assert U.d == 2
    assert U.n == 1
    with pytest.raises(ValueError):
        U.values[0, 0] = 1.0


def test_state_rejects_bad_input():
    with pytest.raises(InvalidStateError):
        OpinionState([1.0])
    with pytest.raises(InvalidStateError):
        OpinionState([0.0, float("nan")])
    with pytest.raises(InvalidStateError):
        OpinionState(np.zeros((2, 2, 2)))


def test_average_examples():
    assert average(U) == pytest.approx([1.0])
    assert average(OpinionState([[1.0, 0.0], [0.0, 1.0]])) == pytest.approx([0.5, 0.5])


def test_variance_examples():
    assert variance(U) == pytest.approx(2.0)
    assert variance(OpinionState([-1.0, 1.0])) == pytest.approx(1.0)
    assert variance(OpinionState([4.0, 4.0, 4.0])) == 0.0


def test_grad_sup_norm_examples():
    assert grad_sup_norm(U) == pytest.approx(3.0)
    assert grad_sup_norm(OpinionState([[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]])) == pytest.approx(5.0)


def test_max_deviation():
    assert max_deviation(U) == pytest.approx(2.0)


def test_weighted_energy_examples():
    assert weighted_energy(U, lambda s: 1.0 / s) == pytest.approx(3.0)
    assert weighted_energy(U, lambda s: 1.0) == pytest.approx(9.0)
    assert weighted_energy(OpinionState([2.0, 2.0]), lambda s: 1.0 / s) == 0.0


def test_entropy_examples():
    assert entropy(OpinionState([1.0, 1.0, 4.0])) == pytest.approx(-4.0 * math.log(4.0))
    assert entropy(OpinionState([1.0, 1.0, 1.0])) == 0.0
    assert entropy(OpinionState([2.5, 2.5, 1.0])) == pytest.approx(-5.0 * math.log(2.5))


def test_renyi_examples():
    assert renyi_entropy(OpinionState([1.0, 1.0, 4.0]), 2.0) == pytest.approx(-math.log(18.0))
    assert renyi_entropy(OpinionState([2.5, 2.5, 1.0]), 2.0) == pytest.approx(-math.log(13.5))
    c, alpha = 0.7, 3.0
    closed = (math.log(4) + alpha * math.log(c)) / (1 - alpha)
    assert renyi_entropy(OpinionState([c] * 4), alpha) == pytest.approx(closed)


def test_entropies_need_positive_scalar_states():
    with pytest.raises(DomainError):
        entropy(U)
    with pytest.raises(DomainError):
        renyi_entropy(OpinionState([[1.0, 1.0], [2.0, 2.0]]), 2.0)
    with pytest.raises(DomainError):
        renyi_entropy(OpinionState([1.0, 2.0]), 1.0)


def test_compute_diagnostics_record():
    record = compute_diagnostics(U, 0.0, rho=lambda s: np.ones_like(s), alpha=1.0)
    assert record.osc == pytest.approx(3.0)
    assert record.variance == pytest.approx(2.0)
    assert record.energy_rho == pytest.approx(9.0)
    assert record.I_alpha == pytest.approx(math.sqrt(2.0))
    assert record.entropy is None

    positive = compute_diagnostics(OpinionState([1.0, 1.0, 4.0]), 1.0, renyi_orders=(2.0,))
    assert positive.entropy == pytest.approx(-4.0 * math.log(4.0))
    assert positive.renyi["2.0"] == pytest.approx(-math.log(18.0))
    assert positive.to_dict()["t"] == 1.0
