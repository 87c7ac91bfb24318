"""Tabular CMDP data model, exact policy evaluation and occupancy measures.

Arrays follow the ``[s][a][s']`` convention throughout: ``P[s, a, s']`` is the
probability of moving to ``s'`` after playing ``a`` in ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CmdpInputError, PlannerError

PROB_TOL = 1e-12
BELLMAN_TOL = 1e-10
# above this many states evaluation switches to fixed-point iteration
DENSE_SOLVE_MAX_STATES = 2000


def _as_float_array(x, name, ndim):
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise CmdpInputError(f"{name}: expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise CmdpInputError(f"{name}: contains non-finite entries")
    return arr


def check_stochastic(P, name="transitions", tol=PROB_TOL):
    """Raise if any row of ``P`` (last axis) is not a probability vector."""
    if np.any(P < 0):
        idx = tuple(int(i) for i in np.argwhere(P < 0)[0])
        raise CmdpInputError(f"{name}{list(idx)}: negative probability {P[idx]!r}")
    sums = P.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise CmdpInputError(f"{name}{list(idx)}: row sums to {sums[idx]!r}, not 1")


@dataclass(frozen=True, eq=False)
class Cmdp:
    """Finite discounted CMDP <S, A, P, r, c, b, rho, gamma>.

    ``r_max`` and ``c_max`` bound the reward channels; the defaults of 1 match
    the usual [0, 1] normalisation, but perturbed rewards and the lower-bound
    instances need larger ranges.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    constraints: np.ndarray
    b: float
    rho: np.ndarray
    gamma: float
    r_max: float = 1.0
    c_max: float = 1.0

    def __post_init__(self):
        P = _as_float_array(self.transitions, "transitions", 3)
        S, A, S2 = P.shape
        if S < 1 or A < 1 or S2 != S:
            raise CmdpInputError(f"transitions: shape {P.shape} is not (S, A, S)")
        r = _as_float_array(self.rewards, "rewards", 2)
        c = _as_float_array(self.constraints, "constraints", 2)
        rho = _as_float_array(self.rho, "rho", 1)
        for name, arr in (("rewards", r), ("constraints", c)):
            if arr.shape != (S, A):
                raise CmdpInputError(f"{name}: shape {arr.shape} does not match (S, A) = {(S, A)}")
        if rho.shape != (S,):
            raise CmdpInputError(f"rho: length {rho.shape[0]} does not match S = {S}")
        check_stochastic(P)
        check_stochastic(rho, "rho")
        gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise CmdpInputError(f"gamma: {gamma!r} not in [0, 1)")
        for name, arr, hi in (("rewards", r, self.r_max), ("constraints", c, self.c_max)):
            if np.any(arr < 0) or np.any(arr > hi):
                idx = tuple(int(i) for i in np.argwhere((arr < 0) | (arr > hi))[0])
                raise CmdpInputError(f"{name}{list(idx)}: {arr[idx]!r} outside [0, {hi}]")
        if not np.isfinite(self.b):
            raise CmdpInputError("b: must be finite")
        for arr in (P, r, c, rho):
            arr.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "constraints", c)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "b", float(self.b))

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    def with_threshold(self, b) -> "Cmdp":
        return Cmdp(self.transitions, self.rewards, self.constraints, b, self.rho,
                    self.gamma, self.r_max, self.c_max)

    def with_rewards(self, rewards, r_max=None) -> "Cmdp":
        return Cmdp(self.transitions, rewards, self.constraints, self.b, self.rho,
                    self.gamma, self.r_max if r_max is None else r_max, self.c_max)


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary stochastic policy, ``probs[s, a] = pi(a | s)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _as_float_array(self.probs, "policy", 2)
        check_stochastic(p, "policy")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def deterministic(cls, actions, num_actions) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, num_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, num_states, num_actions) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))

    def actions(self) -> np.ndarray:
        """Greedy action per state (lowest index on ties)."""
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True, eq=False)
class MixturePolicy:
    """A distribution over policies: one member is drawn once, then followed."""

    members: tuple

    def __post_init__(self):
        members = tuple((float(w), p) for w, p in self.members)
        if not members:
            raise CmdpInputError("mixture: needs at least one member")
        w = np.array([m[0] for m in members])
        if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
            raise CmdpInputError(f"mixture: weights must be >= 0 and sum to 1 (sum={w.sum()!r})")
        object.__setattr__(self, "members", members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.members])


@dataclass(frozen=True, eq=False)
class ValuePair:
    v_reward: float
    v_constraint: float
    reward_values: np.ndarray | None = field(default=None, repr=False)
    constraint_values: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    mu: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.mu.sum())


def _policy_matrices(P, reward, probs):
    P_pi = np.einsum("sa,sap->sp", probs, P)
    r_pi = np.einsum("sa,sa->s", probs, reward)
    return P_pi, r_pi


def _solve_values(P_pi, r_pi, gamma, tol=BELLMAN_TOL):
    S = r_pi.shape[0]
    if S <= DENSE_SOLVE_MAX_STATES:
        M = np.eye(S) - gamma * P_pi
        V = np.linalg.solve(M, r_pi)
        for _ in range(3):
            res = r_pi + gamma * P_pi @ V - V
            if np.max(np.abs(res), initial=0.0) <= tol:
                return V
            V = V + np.linalg.solve(M, res)
    else:
        V = np.zeros(S)
        stop = tol * (1 - gamma) / max(gamma, 1e-300)
        for _ in range(1_000_000):
            V_new = r_pi + gamma * P_pi @ V
            if np.max(np.abs(V_new - V)) <= stop:
                V = V_new
                break
            V = V_new
    res = np.max(np.abs(r_pi + gamma * P_pi @ V - V), initial=0.0)
    if res > tol:
        raise PlannerError(f"policy evaluation residual {res:.3e} exceeds {tol:.0e}")
    return V


def policy_state_values(transitions, reward, gamma, policy) -> np.ndarray:
    """Exact ``V^pi`` for a single reward array."""
    probs = policy.probs if isinstance(policy, Policy) else np.asarray(policy, dtype=float)
    P_pi, r_pi = _policy_matrices(transitions, reward, probs)
    return _solve_values(P_pi, r_pi, gamma)


def q_from_values(transitions, reward, gamma, V) -> np.ndarray:
    S, A, _ = transitions.shape
    return reward + gamma * (transitions.reshape(S * A, S) @ V).reshape(S, A)


def _check_policy_shape(cmdp, policy):
    if policy.probs.shape != (cmdp.num_states, cmdp.num_actions):
        raise CmdpInputError(
            f"policy shape {policy.probs.shape} does not match CMDP ({cmdp.num_states}, {cmdp.num_actions})")


def evaluate_policy(cmdp: Cmdp, policy: Policy) -> ValuePair:
    """Reward and constraint values of ``policy`` at ``rho``, by linear solve."""
    _check_policy_shape(cmdp, policy)
    P_pi = np.einsum("sa,sap->sp", policy.probs, cmdp.transitions)
    Vr = _solve_values(P_pi, np.einsum("sa,sa->s", policy.probs, cmdp.rewards), cmdp.gamma)
    Vc = _solve_values(P_pi, np.einsum("sa,sa->s", policy.probs, cmdp.constraints), cmdp.gamma)
    return ValuePair(float(cmdp.rho @ Vr), float(cmdp.rho @ Vc), Vr, Vc)


def value_iteration(transitions, reward, gamma, tol=1e-10, max_iter=1_000_000):
    """Optimal Q/V for one reward channel, plus the greedy deterministic policy.

    Stops once ``||V_k - V_{k-1}||_inf <= tol (1-gamma) / (2 gamma)`` so that the
    returned ``V`` is within ``tol`` of ``V*``.
    """
    P = np.asarray(transitions, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if not np.all(np.isfinite(reward)):
        raise CmdpInputError("value_iteration: reward has non-finite entries")
    if tol <= 0:
        raise CmdpInputError("value_iteration: tol must be positive")
    S, A, _ = P.shape
    flat = P.reshape(S * A, S)
    V = reward.max(axis=1)
    if gamma > 0:
        stop = tol * (1 - gamma) / (2 * gamma)
        for _ in range(max_iter):
            V_new = (reward + gamma * (flat @ V).reshape(S, A)).max(axis=1)
            diff = np.max(np.abs(V_new - V))
            V = V_new
            if diff <= stop:
                break
        else:
            raise PlannerError(f"value_iteration did not converge in {max_iter} iterations")
    Q = reward + gamma * (flat @ V).reshape(S, A)
    actions = np.argmax(Q, axis=1)
    return Q, Q.max(axis=1), Policy.deterministic(actions, A)


def solve_mdp(transitions, reward, gamma, tol=1e-9):
    """Exactly optimal deterministic policy for one reward channel.

    Value iteration to ``tol`` followed by policy-iteration polishing; returns
    ``(actions, V)`` with ``V`` the exact value of ``actions``.
    """
    P = np.asarray(transitions, dtype=float)
    S, A, _ = P.shape
    _, _, greedy = value_iteration(P, reward, gamma, tol)
    actions = greedy.actions()
    rows = np.arange(S)
    for _ in range(10 * S * A + 10):
        probs = np.zeros((S, A))
        probs[rows, actions] = 1.0
        V = policy_state_values(P, reward, gamma, probs)
        Q = q_from_values(P, reward, gamma, V)
        best = np.argmax(Q, axis=1)
        scale = 1e-12 * max(1.0, float(np.max(np.abs(Q))))
        improve = Q[rows, best] > Q[rows, actions] + scale
        if not np.any(improve):
            return actions, V
        actions = np.where(improve, best, actions)
    raise PlannerError("policy iteration polish did not terminate")


def occupancy_measure(cmdp: Cmdp, policy: Policy) -> OccupancyMeasure:
    """Discounted state-action visitation mass of ``policy`` from ``rho``."""
    _check_policy_shape(cmdp, policy)
    P_pi = np.einsum("sa,sap->sp", policy.probs, cmdp.transitions)
    # flow: d = rho + gamma P_pi^T d
    d = _solve_values(P_pi.T, cmdp.rho, cmdp.gamma, tol=1e-9 * 0.1)
    mu = d[:, None] * policy.probs
    mu[mu < 0] = 0.0
    return OccupancyMeasure(mu)


def flow_residual(cmdp: Cmdp, mu) -> np.ndarray:
    """Per-state violation of ``sum_a mu(s,a) = rho(s) + gamma sum P(s|s',a') mu(s',a')``."""
    mu = mu.mu if isinstance(mu, OccupancyMeasure) else np.asarray(mu)
    inflow = np.einsum("sap,sa->p", cmdp.transitions, mu)
    return mu.sum(axis=1) - cmdp.rho - cmdp.gamma * inflow


def value_from_occupancy(mu, reward) -> float:
    mu = mu.mu if isinstance(mu, OccupancyMeasure) else np.asarray(mu, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if mu.shape != reward.shape:
        raise CmdpInputError(f"occupancy shape {mu.shape} does not match reward shape {reward.shape}")
    return float(np.sum(mu * reward))


def policy_from_occupancy(mu, mass_tol=0.0) -> Policy:
    """``pi(a|s) = mu(s,a) / sum_a' mu(s,a')``; uniform where the state has no mass."""
    mu = mu.mu if isinstance(mu, OccupancyMeasure) else np.asarray(mu, dtype=float)
    S, A = mu.shape
    mass = mu.sum(axis=1)
    probs = np.full((S, A), 1.0 / A)
    live = mass > mass_tol
    probs[live] = mu[live] / mass[live, None]
    probs[live] /= probs[live].sum(axis=1, keepdims=True)
    return Policy(probs)


def collapse_mixture(cmdp: Cmdp, mix: MixturePolicy) -> Policy:
    """Single stationary policy with the same occupancy measure as ``mix``."""
    mu = np.zeros((cmdp.num_states, cmdp.num_actions))
    for w, pol in mix.members:
        if w > 0:
            mu += w * occupancy_measure(cmdp, pol).mu
    return policy_from_occupancy(mu)


def mixture_values(cmdp: Cmdp, mix: MixturePolicy) -> ValuePair:
    """Weighted average of member values (the mixture's value by linearity)."""
    vr = vc = 0.0
    for w, pol in mix.members:
        if w > 0:
            vp = evaluate_policy(cmdp, pol)
            vr += w * vp.v_reward
            vc += w * vp.v_constraint
    return ValuePair(vr, vc)


def bellman_residual(cmdp: Cmdp, policy: Policy, values: ValuePair) -> float:
    worst = 0.0
    for reward, V in ((cmdp.rewards, values.reward_values), (cmdp.constraints, values.constraint_values)):
        P_pi, r_pi = _policy_matrices(cmdp.transitions, reward, policy.probs)
        worst = max(worst, float(np.max(np.abs(r_pi + cmdp.gamma * P_pi @ V - V))))
    return worst


def single_state_cmdp(reward=1.0, constraint=0.0, gamma=0.5, b=0.0) -> Cmdp:
    return Cmdp(np.ones((1, 1, 1)), [[reward]], [[constraint]], b, [1.0], gamma)


def t1_cmdp(b=0.9, gamma=0.5) -> Cmdp:
    """Two-state test CMDP.

    ``s0``: ``a0`` self-loops with reward 1, ``a1`` moves to ``s1``.
    ``s1`` is absorbing with constraint reward 1. Starts in ``s0``.
    """
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = 1.0
    P[0, 1, 1] = 1.0
    P[1, :, 1] = 1.0
    r = [[1.0, 0.0], [0.0, 0.0]]
    c = [[0.0, 0.0], [1.0, 1.0]]
    return Cmdp(P, r, c, b, [1.0, 0.0], gamma)


def stack_policies(policies: Sequence[Policy]) -> np.ndarray:
    return np.stack([p.probs for p in policies])
