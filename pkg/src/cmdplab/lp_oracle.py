"""Exact CMDP solutions over occupancy measures.

The CMDP is solved as the linear program

    max  sum_{s,a} mu(s,a) r(s,a)
    s.t. sum_a mu(s,a) = rho(s) + gamma sum_{s',a'} P(s|s',a') mu(s',a')   for all s
         sum_{s,a} mu(s,a) c(s,a) >= b,   mu >= 0

and the multiplier of the last row is reported as the optimal Lagrange
multiplier ``lambda_star``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_mdp import Cmdp, OccupancyMeasure, Policy, policy_from_occupancy, solve_mdp
from .simplex import linprog_max

FEAS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CmdpSolution:
    feasible: bool
    optimal_value: float | None = None
    mu_star: OccupancyMeasure | None = None
    policy: Policy | None = None
    lambda_star: float | None = None
    constraint_value: float | None = None

    def to_dict(self):
        if not self.feasible:
            return {"feasible": False}
        return {
            "feasible": True,
            "optimal_value": self.optimal_value,
            "constraint_value": self.constraint_value,
            "lambda_star": self.lambda_star,
            "mu_star": self.mu_star.mu.tolist(),
            "policy": self.policy.probs.tolist(),
        }


def max_value(cmdp: Cmdp, reward) -> float:
    """``max_pi <rho, V^pi_reward>``, exact up to linear-solve precision."""
    _, V = solve_mdp(cmdp.transitions, reward, cmdp.gamma)
    return float(cmdp.rho @ V)


def slater_constant(cmdp: Cmdp) -> float:
    return max_value(cmdp, cmdp.constraints) - cmdp.b


def lagrangian_value(cmdp: Cmdp, lam: float) -> float:
    """Dual function ``max_pi V_r + lam (V_c - b)``."""
    if lam < 0:
        raise ValueError("lagrangian_value: lambda must be >= 0")
    return max_value(cmdp, cmdp.rewards + lam * cmdp.constraints) - lam * cmdp.b


def occupancy_lp(cmdp: Cmdp, b=None):
    """Equality-form LP data ``(c, A_eq, b_eq)``; last column is the constraint slack."""
    S, A = cmdp.num_states, cmdp.num_actions
    n = S * A
    A_eq = np.zeros((S + 1, n + 1))
    for s in range(S):
        A_eq[s, s * A:(s + 1) * A] = 1.0
    # subtract gamma * inflow: column (s', a') loses gamma P(s | s', a') in row s
    A_eq[:S, :n] -= cmdp.gamma * cmdp.transitions.reshape(n, S).T
    A_eq[S, :n] = cmdp.constraints.reshape(n)
    A_eq[S, n] = -1.0
    b_eq = np.concatenate([cmdp.rho, [cmdp.b if b is None else b]])
    c = np.concatenate([cmdp.rewards.reshape(n), [0.0]])
    return c, A_eq, b_eq


def solve_cmdp_exact(cmdp: Cmdp) -> CmdpSolution:
    S, A = cmdp.num_states, cmdp.num_actions
    vc_max = max_value(cmdp, cmdp.constraints)
    if vc_max < cmdp.b - FEAS_TOL:
        return CmdpSolution(feasible=False)
    # thresholds within FEAS_TOL of the boundary are solved at the boundary
    b_eff = min(cmdp.b, vc_max)
    c, A_eq, b_eq = occupancy_lp(cmdp, b_eff)
    res = linprog_max(c, A_eq, b_eq)
    if res.status != "optimal":
        raise RuntimeError(f"occupancy LP unexpectedly {res.status}")
    mu = np.maximum(res.x[:S * A].reshape(S, A), 0.0)
    value = float(np.sum(mu * cmdp.rewards))
    # smallest optimal multiplier: zero whenever the constraint costs nothing
    v_unconstrained = max_value(cmdp, cmdp.rewards)
    if v_unconstrained <= value + 1e-9 * max(1.0, abs(value)):
        lam = 0.0
    else:
        lam = max(0.0, -float(res.duals[S]))
    return CmdpSolution(
        feasible=True,
        optimal_value=value,
        mu_star=OccupancyMeasure(mu),
        policy=policy_from_occupancy(mu, mass_tol=1e-14),
        lambda_star=lam,
        constraint_value=float(np.sum(mu * cmdp.constraints)),
    )
