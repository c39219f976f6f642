import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from otkl.errors import BudgetError, DimensionError, MarginalMismatchError, OTKLError, SupportError
from otkl.measures import (
    CostMatrix,
    Distribution,
    InfoBudget,
    JointDistribution,
    cross_information,
    diagonal,
    entropy,
    kl_divergence,
    marginals,
    mutual_information,
    product,
    pythagorean_residual,
    total_variation,
)

from conftest import LN2
from strategies import joint, positive_weights, weights


def test_distribution_normalizes_and_keeps_total():
    d = Distribution([2.0, 6.0, 0.0])
    np.testing.assert_allclose(d.mass, [0.25, 0.75, 0.0])
    assert d.total == 8.0
    assert d.mass[2] == 0.0
    with pytest.raises(ValueError):
        d.mass[0] = 1.0


@pytest.mark.parametrize("bad", [[-1.0, 2.0], [0.0, 0.0], [np.nan, 1.0], [], [[0.5, 0.5]]])
def test_distribution_rejects(bad):
    with pytest.raises(OTKLError):
        Distribution(bad)


def test_joint_and_cost_validation():
    with pytest.raises(DimensionError):
        JointDistribution([0.5, 0.5])
    with pytest.raises(OTKLError):
        CostMatrix([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(BudgetError):
        InfoBudget(-0.1)
    with pytest.raises(BudgetError):
        InfoBudget(float("nan"))


def test_cost_flags():
    assert CostMatrix([[0, 1], [1, 0]]).is_metric
    assert CostMatrix([[0, 1], [1, 0]]).is_translation_invariant
    assert not CostMatrix([[0, 3, 1], [3, 0, 1], [1, 1, 0]]).is_metric  # triangle fails
    assert not CostMatrix([[0, 1, 2]]).is_metric


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert kl_divergence([0.75, 0.25], [0.5, 0.5]) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.1308, abs=1e-4)
    assert kl_divergence([1, 0], [0, 1]) == math.inf
    with pytest.raises(DimensionError):
        kl_divergence([1, 0], [1, 0, 0])


def test_entropy_examples():
    assert entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-15)
    assert entropy([1, 0]) == 0.0
    p = [0.75, 0.25]
    assert entropy(p) == pytest.approx(LN2 - kl_divergence(p, [0.5, 0.5]), abs=1e-15)
    with pytest.raises(SupportError):
        entropy(p, [1.0, 0.0])


@given(weights(5), positive_weights(5))
def test_entropy_reference_identity(p, r):
    # H[p/r] = ln r(X) - D[p, r / r(X)]
    lhs = entropy(p, r)
    rhs = math.log(r.sum()) - kl_divergence(p, r)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_mutual_information_examples():
    q, p = Distribution([0.3, 0.7]), Distribution([0.2, 0.5, 0.3])
    assert mutual_information(product(q, p)) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(np.diag([0.5, 0.5])) == pytest.approx(LN2, abs=1e-15)


def test_cross_information_examples():
    q = Distribution([0.5, 0.5])
    assert cross_information(product(q, q), q) == pytest.approx(0.0, abs=1e-15)
    p = Distribution([0.75, 0.25])
    assert cross_information(product(q, p), q) == pytest.approx(kl_divergence(p, q), abs=1e-15)
    assert cross_information(np.diag([0.5, 0.5]), q) == pytest.approx(LN2, abs=1e-15)
    with pytest.raises(MarginalMismatchError):
        cross_information(product(q, p), Distribution([0.4, 0.6]))
    with pytest.raises(DimensionError):
        cross_information(np.ones((2, 3)), q)


def test_marginals_examples():
    q, p = marginals(np.diag([0.5, 0.5]))
    np.testing.assert_allclose(q.mass, [0.5, 0.5])
    np.testing.assert_allclose(p.mass, [0.5, 0.5])
    q, p = marginals([[0.2, 0.1], [0.3, 0.4]])
    np.testing.assert_allclose(q.mass, [0.3, 0.7], atol=1e-15)
    np.testing.assert_allclose(p.mass, [0.5, 0.5], atol=1e-15)


@given(weights(4), weights(4))
def test_kl_nonnegative_and_zero_iff_equal(p, q):
    q = q + 1e-3
    d = kl_divergence(p, q)
    assert d >= 0
    pn, qn = p / p.sum(), q / q.sum()
    if np.max(np.abs(pn - qn)) > 1e-6:
        assert d > 0
    assert kl_divergence(q, q) == 0.0


@given(joint(square=True, positive=True))
def test_pythagorean_identity(w):
    assert pythagorean_residual(w) <= 1e-10


@given(joint())
def test_shannon_inequality(w):
    q, p = marginals(w)
    i = mutual_information(w)
    assert -1e-15 <= i <= min(entropy(q), entropy(p)) + 1e-12


@given(weights(5))
def test_self_information(q):
    assert mutual_information(diagonal(q)) == pytest.approx(entropy(q), abs=1e-12)


@given(weights(3), weights(4))
def test_product_marginals(q, p):
    q, p = Distribution(q), Distribution(p)
    a, b = marginals(product(q, p))
    assert np.max(np.abs(a.mass - q.mass)) <= 1e-15
    assert np.max(np.abs(b.mass - p.mass)) <= 1e-15


def test_mutual_information_tiny_marginals_stay_finite():
    w = np.array([[0.5, 5e-324], [0.0, 0.5]])
    assert math.isfinite(mutual_information(w))


def test_total_variation():
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == 0.5
    with pytest.raises(DimensionError):
        total_variation([1.0], [0.5, 0.5])
