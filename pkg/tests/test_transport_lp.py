import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from otkl.errors import DimensionError, SolverStateError
from otkl.measures import JointDistribution
from otkl.oracles import InstanceSpec, generate, lp_bruteforce, monotone_1d
from otkl.transport_lp import (
    TransportSolution,
    complementary_slackness_residual,
    dual_feasibility_violation,
    dual_value,
    solve_otp,
    tree_flows,
)

from conftest import FIXTURE_P, FIXTURE_Q, HAMMING2
from strategies import transport_instance, weights


def highs_value(q, p, c):
    n, m = c.shape
    a_eq = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    res = linprog(c.ravel(), A_eq=a_eq, b_eq=np.concatenate([q, p]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def assert_certified(sol, q, p, c, tol=1e-9):
    q, p = np.asarray(q, float) / np.sum(q), np.asarray(p, float) / np.sum(p)
    assert np.max(np.abs(sol.plan.mass.sum(axis=1) - q)) <= tol
    assert np.max(np.abs(sol.plan.mass.sum(axis=0) - p)) <= tol
    assert abs(sol.value - dual_value(sol, q, p)) <= tol
    assert dual_feasibility_violation(sol.f, sol.g, c) <= tol
    assert complementary_slackness_residual(sol, c) <= tol


def test_fixture_value_and_dual():
    sol = solve_otp(FIXTURE_Q, FIXTURE_P, HAMMING2)
    assert sol.value == pytest.approx(0.25, abs=1e-15)
    assert dual_value(sol, FIXTURE_Q, FIXTURE_P) == pytest.approx(0.25, abs=1e-15)
    assert sol.status == "optimal"
    assert_certified(sol, FIXTURE_Q, FIXTURE_P, HAMMING2)


def test_identical_marginals_metric_cost():
    q = [0.5, 0.5]
    sol = solve_otp(q, q, HAMMING2)
    assert sol.value == 0.0
    np.testing.assert_allclose(sol.plan.mass, np.diag([0.5, 0.5]), atol=1e-15)
    assert dual_value(sol, q, q) == pytest.approx(0.0, abs=1e-15)


def test_identity_plan_for_metric_cost_on_grid():
    q = np.array([0.1, 0.2, 0.3, 0.4])
    c = np.abs(np.subtract.outer(np.arange(4), np.arange(4))).astype(float)
    sol = solve_otp(q, q, c)
    assert sol.value == 0.0
    np.testing.assert_allclose(sol.plan.mass, np.diag(q), atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        solve_otp([0.5, 0.5], [1.0], HAMMING2)
    sol = solve_otp(FIXTURE_Q, FIXTURE_P, HAMMING2)
    with pytest.raises(DimensionError):
        dual_value(sol, [1.0, 0, 0], FIXTURE_P)


def test_dual_value_rejects_non_optimal():
    sol = solve_otp(FIXTURE_Q, FIXTURE_P, HAMMING2)
    bad = TransportSolution(sol.plan, sol.value, sol.f, sol.g, 0, "infeasible-input", sol.basis)
    with pytest.raises(SolverStateError):
        dual_value(bad, FIXTURE_Q, FIXTURE_P)


def test_zero_mass_atoms_keep_indices():
    q = [0.0, 0.5, 0.5]
    p = [0.25, 0.0, 0.75]
    c = np.arange(9.0).reshape(3, 3)
    sol = solve_otp(q, p, c)
    assert sol.plan.shape == (3, 3)
    assert np.all(sol.plan.mass[0] == 0) and np.all(sol.plan.mass[:, 1] == 0)
    assert_certified(sol, q, p, c)


def test_point_masses():
    sol = solve_otp([1.0], [0.2, 0.8], [[3.0, 1.0]])
    assert sol.value == pytest.approx(0.2 * 3 + 0.8 * 1, abs=1e-15)


def test_pivot_cap():
    spec = InstanceSpec(8, 8, 3)
    q, p, c = generate(spec)
    with pytest.raises(RuntimeError):
        solve_otp(q, p, c, max_pivots=0)


def test_tree_flows_recovers_marginals():
    cells = [(0, 0), (0, 1), (1, 1)]
    flows = tree_flows(cells, np.array([0.6, 0.4]), np.array([0.3, 0.7]))
    assert flows == pytest.approx({(0, 0): 0.3, (0, 1): 0.3, (1, 1): 0.4})


@given(transport_instance(max_size=3))
def test_matches_bruteforce(inst):
    q, p, c = inst
    sol = solve_otp(q, p, c)
    value, _ = lp_bruteforce(q, p, c)
    assert abs(sol.value - value) <= 1e-10
    assert_certified(sol, q, p, c)


@given(transport_instance(max_size=7, max_cost=10.0))
def test_matches_highs(inst):
    q, p, c = inst
    sol = solve_otp(q, p, c)
    ref = highs_value(q / q.sum(), p / p.sum(), c)
    assert abs(sol.value - ref) <= 1e-8 * max(1.0, abs(ref))
    assert_certified(sol, q, p, c, tol=1e-9 * max(1.0, c.max()))


@given(st.integers(2, 40), st.data())
def test_matches_monotone_coupling(n, data):
    q = data.draw(weights(n))
    p = data.draw(weights(n))
    spacing = data.draw(st.floats(0.1, 5.0))
    c = spacing * np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float)
    assert abs(solve_otp(q, p, c).value - monotone_1d(q, p, spacing)) <= 1e-10 * max(1.0, spacing)


@given(st.integers(2, 5), st.data())
def test_metric_symmetry(n, data):
    q = data.draw(weights(n))
    p = data.draw(weights(n))
    pts = data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
    c = np.abs(np.subtract.outer(pts, pts))
    forward = solve_otp(q, p, c).value
    backward = solve_otp(p, q, c.T).value
    assert abs(forward - backward) <= 1e-10


@settings(max_examples=3)
@given(st.integers(0, 1000))
def test_large_instance_feasible_and_certified(seed):
    q, p, c = generate(InstanceSpec(64, 64, seed))
    sol = solve_otp(q, p, c)
    assert_certified(sol, q.mass, p.mass, c.cost)
    assert abs(sol.value - highs_value(q.mass, p.mass, c.cost)) <= 1e-9


def test_degenerate_uniform_assignment():
    # n! optimal vertices, heavily degenerate
    n = 6
    q = np.ones(n)
    rng = np.random.default_rng(0)
    c = rng.integers(0, 3, size=(n, n)).astype(float)
    sol = solve_otp(q, q, c)
    assert_certified(sol, q, q, c)
    assert sol.value == pytest.approx(highs_value(q / n, q / n, c), abs=1e-12)


def test_plan_is_joint_distribution():
    sol = solve_otp(FIXTURE_Q, FIXTURE_P, HAMMING2)
    assert isinstance(sol.plan, JointDistribution)
    f, g = sol.potentials
    assert f.shape == (2,) and g.shape == (2,)
