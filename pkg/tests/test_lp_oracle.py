import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmdplab.core_mdp import Cmdp, evaluate_policy, solve_mdp, t1_cmdp
from cmdplab.lp_oracle import lagrangian_value, max_value, occupancy_lp, slater_constant, solve_cmdp_exact
from cmdplab.simplex import linprog_max

from conftest import random_instance

scipy_optimize = pytest.importorskip("scipy.optimize")


def feasible_instance(seed, frac=0.6, **kw):
    """Random CMDP with b placed between min and max achievable constraint value."""
    m = random_instance(seed, **kw)
    hi = max_value(m, m.constraints)
    lo = -max_value(m, -m.constraints)
    return m.with_threshold(lo + frac * (hi - lo))


def test_t1_tight():
    sol = solve_cmdp_exact(t1_cmdp(b=0.9))
    assert sol.feasible
    assert sol.optimal_value == pytest.approx(0.2, abs=1e-8)
    assert sol.policy.probs[0, 0] == pytest.approx(2 / 11, abs=1e-8)
    assert sol.constraint_value == pytest.approx(0.9, abs=1e-8)
    assert sol.lambda_star == pytest.approx(2.0, abs=1e-8)


def test_t1_vacuous_and_infeasible():
    sol = solve_cmdp_exact(t1_cmdp(b=0.0))
    assert sol.optimal_value == pytest.approx(2.0, abs=1e-8) and sol.lambda_star == 0.0
    assert not solve_cmdp_exact(t1_cmdp(b=1.5)).feasible
    assert solve_cmdp_exact(t1_cmdp(b=1.5)).to_dict() == {"feasible": False}


def test_slater_examples():
    assert slater_constant(t1_cmdp(b=0.9)) == pytest.approx(0.1, abs=1e-12)
    assert slater_constant(t1_cmdp(b=1.0)) == pytest.approx(0.0, abs=1e-12)
    m = Cmdp(np.ones((1, 2, 1)), [[1.0, 0.0]], [[0.0, 0.0]], 0.0, [1.0], 0.5)
    assert slater_constant(m) == 0.0


def test_lagrangian_examples():
    m = t1_cmdp(b=0.9)
    assert lagrangian_value(m, 0.0) == pytest.approx(2.0, abs=1e-10)
    assert lagrangian_value(m, 2.0) == pytest.approx(0.2, abs=1e-9)
    # for large lambda the best response is "go": L = lambda (1 - 0.9)
    slope = (lagrangian_value(m, 200.0) - lagrangian_value(m, 100.0)) / 100.0
    assert slope == pytest.approx(0.1, abs=1e-9)
    with pytest.raises(ValueError):
        lagrangian_value(m, -1.0)


def test_simplex_small_lp():
    # max x + 2y  s.t. x + y + s1 = 4, x + 3y + s2 = 6
    res = linprog_max([1, 2, 0, 0], [[1, 1, 1, 0], [1, 3, 0, 1]], [4, 6])
    assert res.status == "optimal"
    assert res.x[:2] == pytest.approx([3.0, 1.0])
    assert res.objective == pytest.approx(5.0)
    assert res.duals == pytest.approx([0.5, 0.5])


def test_simplex_infeasible_and_unbounded():
    assert linprog_max([1, 0], [[1, 1]], [-1]).status == "infeasible"
    assert linprog_max([1, 0], [[1, -1]], [1]).status == "unbounded"


def test_simplex_redundant_rows():
    res = linprog_max([1, 1], [[1, 1], [2, 2]], [1, 2])
    assert res.status == "optimal" and res.objective == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matches_highs(seed):
    m = feasible_instance(seed)
    sol = solve_cmdp_exact(m)
    c, A_eq, b_eq = occupancy_lp(m)
    ref = scipy_optimize.linprog(-c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert ref.status == 0
    assert sol.optimal_value == pytest.approx(-ref.fun, abs=1e-8)
    vals = evaluate_policy(m, sol.policy)
    assert vals.v_reward == pytest.approx(sol.optimal_value, abs=1e-7)
    assert vals.v_constraint >= m.b - 1e-7


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_strong_duality(seed):
    m = feasible_instance(seed)
    sol = solve_cmdp_exact(m)
    assert lagrangian_value(m, sol.lambda_star) == pytest.approx(sol.optimal_value, abs=1e-6)
    grid = np.linspace(0, 2 * sol.lambda_star + 1, 41)
    assert min(lagrangian_value(m, lam) for lam in grid) >= sol.optimal_value - 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_randomizes_in_at_most_one_state(seed):
    m = feasible_instance(seed, S=5, A=3)
    sol = solve_cmdp_exact(m)
    mu = sol.mu_star.mu
    visited = mu.sum(axis=1) > 1e-9
    mixed = np.sum(np.sum(mu[visited] > 1e-9, axis=1) > 1)
    assert mixed <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_constraint_equal_to_reward(seed):
    m = random_instance(seed)
    same = Cmdp(m.transitions, m.rewards, m.rewards, 0.0, m.rho, m.gamma)
    _, V = solve_mdp(m.transitions, m.rewards, m.gamma)
    assert solve_cmdp_exact(same).optimal_value == pytest.approx(float(m.rho @ V), abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.45))
def test_dual_bound_with_shifted_threshold(seed, frac):
    m = random_instance(seed, gamma=0.8)
    zeta = 0.3
    m = m.with_threshold(max_value(m, m.constraints) - zeta)
    delta = frac * zeta
    sol = solve_cmdp_exact(m.with_threshold(m.b + delta))
    assert sol.feasible
    assert sol.lambda_star <= 2 / (zeta * (1 - m.gamma)) + 1e-6


def test_lambda_zero_when_constraint_slack():
    m = feasible_instance(5, frac=0.0)
    assert solve_cmdp_exact(m).lambda_star == 0.0
