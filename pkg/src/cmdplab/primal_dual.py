"""Epsilon-net dual descent with best-response primal updates.

Each iteration ``t`` computes a greedy policy for ``r_p + lambda_t c`` on the
empirical model and takes a projected, grid-rounded gradient step on lambda.

The greedy policy depends on ``lambda`` only through a piecewise-constant map.
For every deterministic policy that has been a best response we store the
closed interval of multipliers on which it stays optimal (computed from its
advantage functions). While ``lambda_t`` falls inside a stored interval the
planner's answer is already known, so the loop runs in a compiled kernel and
value iteration is called only when ``lambda_t`` leaves every known interval.
``reuse_best_responses=False`` runs value iteration on every iteration and is
used to check that both paths agree.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core_mdp import (
    Cmdp,
    MixturePolicy,
    Policy,
    collapse_mixture,
    policy_state_values,
    q_from_values,
    value_iteration,
)
from .errors import CmdpInputError, PlannerError
from .sampling import EmpiricalModel

log = logging.getLogger(__name__)

MODES = ("relaxed", "strict", "manual")
# full per-iteration traces are kept up to this length unless asked otherwise
TRACE_RECORD_LIMIT = 1_000_000
# relative distance at which U / eps_l counts as an integer
_GRID_SNAP = 1e-9


@dataclass(frozen=True)
class EpsilonNet:
    """Grid ``{0, eps, 2 eps, ..., (M-1) eps, U}`` indexed by ``k = 0..M``."""

    resolution: float
    cap: float
    num_multiples: int

    @property
    def size(self) -> int:
        return self.num_multiples + 1

    def value(self, k: int) -> float:
        if k < 0 or k > self.num_multiples:
            raise IndexError(f"grid index {k} out of range 0..{self.num_multiples}")
        return float(k) * self.resolution if k < self.num_multiples else self.cap

    def round_index(self, x: float) -> int:
        """Index of the nearest grid point to ``x`` in ``[0, U]``, ties to the smaller."""
        x = min(max(float(x), 0.0), self.cap)
        return int(kernels._dual_loop_py.round_to_grid(x, self.resolution, self.num_multiples, self.cap))

    def round(self, x: float) -> float:
        return self.value(self.round_index(x))

    def index_of(self, lam: float) -> int:
        k = self.round_index(lam)
        if self.value(k) != lam:
            raise CmdpInputError(f"lambda {lam!r} is not a grid point")
        return k

    def points(self) -> np.ndarray:
        if self.size > 10_000_000:
            raise MemoryError(f"grid has {self.size} points; use value(k) instead")
        pts = np.arange(self.num_multiples, dtype=float) * self.resolution
        return np.append(pts, self.cap)


def make_epsilon_net(U: float, eps_l: float) -> EpsilonNet:
    if not (eps_l > 0):
        raise CmdpInputError(f"epsilon-net resolution must be > 0, got {eps_l!r}")
    if not (U > 0) or not math.isfinite(U):
        raise CmdpInputError(f"dual cap U must be finite and > 0, got {U!r}")
    if eps_l > U:
        raise CmdpInputError(f"epsilon-net resolution {eps_l!r} exceeds U={U!r}")
    n = U / eps_l
    r = round(n)
    if abs(n - r) <= _GRID_SNAP * max(1.0, n):
        M = int(r)  # U is (numerically) the multiple r * eps_l
    else:
        M = int(math.floor(n)) + 1
    return EpsilonNet(float(eps_l), float(U), M)


def dual_step(lambda_t, eta, v_c_hat, b_prime, net: EpsilonNet) -> float:
    x = lambda_t - eta * (v_c_hat - b_prime)
    x = min(max(x, 0.0), net.cap)
    return net.round(x)


@dataclass(frozen=True)
class PdConfig:
    U: float
    eps_net: float
    T: int
    eta: float
    b_prime: float
    omega: float = 0.0
    eps_opt: float | None = None
    mode: str = "manual"
    epsilon: float | None = None
    delta: float | None = None
    recommended_n: int | None = None
    t_uncapped: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise CmdpInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.U > 0):
            raise CmdpInputError(f"U must be > 0, got {self.U!r}")
        if not (0 < self.eps_net <= self.U):
            raise CmdpInputError(f"eps_net must lie in (0, U], got {self.eps_net!r}")
        if int(self.T) != self.T or self.T < 1:
            raise CmdpInputError(f"T must be a positive integer, got {self.T!r}")
        if not (self.eta > 0):
            raise CmdpInputError(f"eta must be > 0, got {self.eta!r}")
        if self.omega < 0:
            raise CmdpInputError(f"omega must be >= 0, got {self.omega!r}")

    @property
    def capped(self) -> bool:
        return self.t_uncapped is not None and self.t_uncapped > self.T

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["capped"] = self.capped
        return d


def accuracy_schedule(U, lambda_star, eps_opt, gamma):
    """``(T, eta, eps_l)`` for target accuracy ``eps_opt`` given ``U > lambda_star``."""
    if not (U > lambda_star >= 0):
        raise CmdpInputError(f"need U > lambda_star >= 0, got U={U!r}, lambda_star={lambda_star!r}")
    if not (eps_opt > 0):
        raise CmdpInputError("eps_opt must be > 0")
    slack = U - lambda_star
    T = 4 * U**2 / (eps_opt**2 * (1 - gamma) ** 2) * (1 + 1 / slack**2)
    T = int(math.ceil(T))
    eta = U * (1 - gamma) / math.sqrt(T)
    eps_l = eps_opt**2 * (1 - gamma) ** 2 * slack / (6 * U)
    return T, eta, eps_l


def dual_regret_bound(T, eps_l, U, gamma):
    return T**1.5 * (eps_l**2 + 2 * eps_l * U) / (2 * U * (1 - gamma)) + U * math.sqrt(T) / (1 - gamma)


def _check_eps(epsilon, gamma):
    if not (0 < gamma < 1):
        raise CmdpInputError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not (0 < epsilon <= 1 / (1 - gamma) * (1 + 1e-12)):
        raise CmdpInputError(f"epsilon must lie in (0, 1/(1-gamma)] = (0, {1 / (1 - gamma)!r}], got {epsilon!r}")


def _check_delta(delta):
    if not (0 < delta < 1):
        raise CmdpInputError(f"delta must lie in (0, 1), got {delta!r}")


def relaxed_sample_size(epsilon, delta, gamma, kappa=1.0):
    return int(math.ceil(kappa * math.log(1 / delta) / ((1 - gamma) ** 3 * epsilon**2)))


def strict_sample_size(epsilon, delta, gamma, zeta, kappa=1.0):
    return int(math.ceil(kappa * math.log(1 / delta) / ((1 - gamma) ** 5 * zeta**2 * epsilon**2)))


def preset_relaxed(epsilon, delta, gamma, b, kappa=1.0) -> PdConfig:
    _check_eps(epsilon, gamma)
    _check_delta(delta)
    U = 32 / (5 * epsilon * (1 - gamma))
    eps_opt = epsilon / 4
    T, eta, eps_l = accuracy_schedule(U, U / 2, eps_opt, gamma)
    return PdConfig(U=U, eps_net=eps_l, T=T, eta=eta, b_prime=b - 3 * epsilon / 8,
                    omega=epsilon * (1 - gamma) / 8, eps_opt=eps_opt, mode="relaxed",
                    epsilon=epsilon, delta=delta,
                    recommended_n=relaxed_sample_size(epsilon, delta, gamma, kappa), t_uncapped=T)


def preset_strict(epsilon, delta, gamma, b, zeta, kappa=1.0) -> PdConfig:
    _check_eps(epsilon, gamma)
    _check_delta(delta)
    if not (zeta > 0):
        raise CmdpInputError(f"strict mode needs a Slater constant zeta > 0, got {zeta!r}; "
                             "estimate it first")
    Delta = epsilon * (1 - gamma) * zeta / 40
    U = 8 / (zeta * (1 - gamma))
    eps_opt = Delta / 5
    T, eta, eps_l = accuracy_schedule(U, U / 2, eps_opt, gamma)
    return PdConfig(U=U, eps_net=eps_l, T=T, eta=eta, b_prime=b + Delta,
                    omega=epsilon * (1 - gamma) / 10, eps_opt=eps_opt, mode="strict",
                    epsilon=epsilon, delta=delta,
                    recommended_n=strict_sample_size(epsilon, delta, gamma, zeta, kappa), t_uncapped=T)


def apply_t_cap(cfg: PdConfig, t_cap: int | None, gamma: float, warn: bool = True) -> PdConfig:
    """Shorten the run to ``t_cap`` iterations, re-deriving eta for the shorter horizon."""
    if t_cap is None or cfg.T <= t_cap:
        return cfg
    if t_cap < 1:
        raise CmdpInputError(f"t_cap must be >= 1, got {t_cap!r}")
    t_cap = int(t_cap)
    if warn:
        log.warning("capping T from %d to %d; the accuracy guarantee for eps_opt=%s no longer applies",
                    cfg.T, t_cap, cfg.eps_opt)
    return replace(cfg, T=t_cap, eta=cfg.U * (1 - gamma) / math.sqrt(t_cap),
                   t_uncapped=cfg.t_uncapped or cfg.T)


def epsilon_for_budget(n, delta, gamma, mode="relaxed", zeta=None, kappa=1.0):
    """Smallest accuracy whose recommended sample size is ``n`` (clamped to ``1/(1-gamma)``)."""
    if n < 1:
        raise CmdpInputError("sample budget must be >= 1")
    _check_delta(delta)
    if mode == "relaxed":
        eps = math.sqrt(kappa * math.log(1 / delta) / ((1 - gamma) ** 3 * n))
    elif mode == "strict":
        if not (zeta and zeta > 0):
            raise CmdpInputError("strict mode needs zeta > 0")
        eps = math.sqrt(kappa * math.log(1 / delta) / ((1 - gamma) ** 5 * zeta**2 * n))
    else:
        raise CmdpInputError(f"mode must be relaxed or strict, got {mode!r}")
    return min(eps, 1 / (1 - gamma))


def planner_tolerance(cfg: PdConfig) -> float:
    if cfg.eps_opt is None:
        return 1e-10
    return min(1e-10, cfg.eps_opt / 10)


@dataclass(frozen=True, eq=False)
class DualTrace:
    """Dual iterates and the best responses played against them.

    ``policy_actions[p]`` is the ``p``-th distinct best response, with
    empirical values ``v_reward[p]``, ``v_constraint[p]`` at ``rho``.
    ``grid_index``/``policy_id`` hold the per-iteration record when it was
    kept; ``count``, ``sum_index`` and ``count_top`` are exact per-policy
    aggregates that suffice for the dual regret even without it.
    """

    T: int
    b_prime: float
    net: EpsilonNet
    policy_actions: np.ndarray
    v_reward: np.ndarray
    v_constraint: np.ndarray
    count: np.ndarray
    sum_index: np.ndarray
    count_top: np.ndarray
    grid_index: np.ndarray | None = None
    policy_id: np.ndarray | None = None
    final_lambda: float = 0.0
    tail_mean_lambda: float = 0.0
    tail_length: int = 0
    planner_calls: int = 0

    @property
    def recorded(self) -> bool:
        return self.grid_index is not None

    @property
    def lambdas(self) -> np.ndarray:
        if not self.recorded:
            raise ValueError("per-iteration trace was not recorded for this run")
        eps, M, U = self.net.resolution, self.net.num_multiples, self.net.cap
        lam = self.grid_index.astype(float) * eps
        lam[self.grid_index >= M] = U
        return lam

    def iterate_values(self):
        """Per-iteration ``(V_rp, V_c)`` of the best response at ``rho``."""
        if not self.recorded:
            raise ValueError("per-iteration trace was not recorded for this run")
        return self.v_reward[self.policy_id], self.v_constraint[self.policy_id]

    def sum_lambda_per_policy(self) -> np.ndarray:
        return self.net.resolution * self.sum_index.astype(float) + self.net.cap * self.count_top

    def to_dict(self, include_iterations=True):
        d = {
            "T": self.T,
            "b_prime": self.b_prime,
            "eps_net": self.net.resolution,
            "U": self.net.cap,
            "policies": self.policy_actions.tolist(),
            "v_reward": self.v_reward.tolist(),
            "v_constraint": self.v_constraint.tolist(),
            "count": self.count.tolist(),
            "final_lambda": self.final_lambda,
            "tail_mean_lambda": self.tail_mean_lambda,
            "planner_calls": self.planner_calls,
        }
        if include_iterations and self.recorded:
            d["lambdas"] = self.lambdas.tolist()
            d["policy_id"] = self.policy_id.tolist()
        return d


def dual_regret(trace: DualTrace, lam: float, b_prime: float | None = None) -> float:
    """``sum_t (lambda_t - lam)(V_c(pi_t) - b')``."""
    if trace.T == 0:
        return 0.0
    bp = trace.b_prime if b_prime is None else b_prime
    g = trace.v_constraint - bp
    if trace.recorded:
        return float(np.sum((trace.lambdas - lam) * g[trace.policy_id]))
    return float(np.sum((trace.sum_lambda_per_policy() - lam * trace.count) * g))


def gap_margin(q_star) -> float:
    """Smallest over states of ``max_a Q(s,a) - second largest Q(s,a)``."""
    q = np.asarray(q_star, dtype=float)
    if q.ndim != 2:
        raise CmdpInputError("gap_margin expects a [state][action] array")
    if q.shape[1] < 2:
        return math.inf
    top2 = np.sort(q, axis=1)[:, -2:]
    return float(np.min(top2[:, 1] - top2[:, 0]))


@dataclass(frozen=True, eq=False)
class PdResult:
    mixture: MixturePolicy
    trace: DualTrace
    collapsed: Policy
    v_reward_hat: float
    v_constraint_hat: float
    config: PdConfig
    backend: str
    dual_saturated: bool = False

    @property
    def planner_calls(self):
        return self.trace.planner_calls

    def member_policies(self):
        """Each distinct best response with its multiplicity among the ``T`` iterates."""
        A = self.trace.policy_actions.shape[1] if self.trace.policy_actions.size else 0
        return [(int(c), Policy.deterministic(a, A))
                for a, c in zip(self.trace.policy_actions, self.trace.count) if c > 0]


class _BestResponses:
    """Distinct best responses and the multiplier interval each is optimal on."""

    def __init__(self, model: Cmdp, b_prime, tol):
        self.P = model.transitions
        self.r = model.rewards
        self.c = model.constraints
        self.rho = model.rho
        self.gamma = model.gamma
        self.b_prime = b_prime
        self.tol = tol
        self.S, self.A = model.num_states, model.num_actions
        self.index = {}
        self.actions = []
        self.v_r = []
        self.v_c = []
        cap = 16
        self.lo = np.zeros(cap)
        self.hi = np.zeros(cap)
        self.grad = np.zeros(cap)
        self.count = np.zeros(cap, dtype=np.int64)
        self.sumk = np.zeros(cap, dtype=np.int64)
        self.ntop = np.zeros(cap, dtype=np.int64)
        self.calls = 0

    @property
    def n(self):
        return len(self.actions)

    def _grow(self):
        cap = 2 * self.lo.size
        for name in ("lo", "hi", "grad", "count", "sumk", "ntop"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: old.size] = old
            setattr(self, name, new)

    def solve(self, lam, t) -> int:
        """Plan at ``lam``; return the policy id, registering it if new."""
        self.calls += 1
        try:
            _, _, greedy = value_iteration(self.P, self.r + lam * self.c, self.gamma, tol=self.tol)
        except PlannerError as exc:
            raise PlannerError(f"best response failed at iteration t={t} (lambda={lam!r}): {exc}") from exc
        acts = greedy.actions()
        key = acts.tobytes()
        pid = self.index.get(key)
        if pid is not None:
            self.lo[pid] = min(self.lo[pid], lam)
            self.hi[pid] = max(self.hi[pid], lam)
            return pid
        probs = greedy.probs
        Vr = policy_state_values(self.P, self.r, self.gamma, probs)
        Vc = policy_state_values(self.P, self.c, self.gamma, probs)
        adv_r = q_from_values(self.P, self.r, self.gamma, Vr) - Vr[:, None]
        adv_c = q_from_values(self.P, self.c, self.gamma, Vc) - Vc[:, None]
        lo, hi = self._interval(adv_r, adv_c, lam)
        if self.n == self.lo.size:
            self._grow()
        pid = self.n
        self.index[key] = pid
        self.actions.append(acts)
        self.v_r.append(float(self.rho @ Vr))
        self.v_c.append(float(self.rho @ Vc))
        self.lo[pid], self.hi[pid] = lo, hi
        self.grad[pid] = self.v_c[pid] - self.b_prime
        return pid

    def _interval(self, adv_r, adv_c, lam):
        """Multipliers ``l >= 0`` with ``adv_r + l adv_c <= tau`` everywhere.

        ``tau`` absorbs rounding in the advantages; the returned interval is
        forced to contain ``lam`` because value iteration certified it there.
        """
        scale = 1.0 + np.max(np.abs(adv_r)) + lam * np.max(np.abs(adv_c))
        tau = 1e-11 * scale
        lo, hi = 0.0, math.inf
        ar, ac = adv_r.ravel(), adv_c.ravel()
        tiny = 1e-14 * (1.0 + np.max(np.abs(ac)))
        pos = ac > tiny
        neg = ac < -tiny
        flat = ~(pos | neg)
        if np.any(ar[flat] > tau):
            return lam, lam
        if np.any(pos):
            hi = float(np.min((tau - ar[pos]) / ac[pos]))
        if np.any(neg):
            lo = max(0.0, float(np.max((tau - ar[neg]) / ac[neg])))
        return min(lo, lam), max(hi, lam)


def _as_model(emp) -> Cmdp:
    if isinstance(emp, EmpiricalModel):
        return emp.as_cmdp()
    if isinstance(emp, Cmdp):
        return emp
    raise CmdpInputError(f"expected an EmpiricalModel or Cmdp, got {type(emp).__name__}")


def run_primal_dual(emp, cfg: PdConfig, planner_tol: float | None = None, *,
                    record_trace: bool | None = None, backend: str | None = None,
                    reuse_best_responses: bool = True, tail_window: int | None = None) -> PdResult:
    """Run the dual-descent loop for ``cfg.T`` iterations on ``emp``.

    ``emp`` is an :class:`EmpiricalModel` (planned on its perturbed rewards)
    or any :class:`Cmdp`, whose rewards are used as given.
    """
    model = _as_model(emp)
    tol = planner_tolerance(cfg) if planner_tol is None else planner_tol
    net = make_epsilon_net(cfg.U, cfg.eps_net)
    T = int(cfg.T)
    record = T <= TRACE_RECORD_LIMIT if record_trace is None else bool(record_trace)
    W = tail_window or max(1, min(10_000, T // 10))
    tail_start = T - W
    br = _BestResponses(model, cfg.b_prime, tol)
    rec_k = np.zeros(T if record else 1, dtype=np.int64)
    rec_pid = np.zeros(T if record else 1, dtype=np.int32)
    tail = np.zeros(1)
    M, eps, U, eta = net.num_multiples, net.resolution, net.cap, float(cfg.eta)

    if reuse_best_responses:
        kern = kernels.get_kernel(backend)
        backend_name = "python" if kern is kernels._dual_loop_py else "compiled"
        t, k, cur = 0, 0, -1
        while True:
            t, k, cur, need = kern.advance(t, T, k, cur, eps, M, U, eta, br.lo, br.hi, br.grad, br.n,
                                           br.count, br.sumk, br.ntop, tail_start, tail,
                                           rec_k, rec_pid, record)
            if not need:
                break
            lam = float(k) * eps if k < M else U
            cur = br.solve(lam, t)
    else:
        backend_name = "literal"
        k = 0
        tail_acc = 0.0
        for t in range(T):
            lam = float(k) * eps if k < M else U
            pid = br.solve(lam, t)
            if record:
                rec_k[t] = k
                rec_pid[t] = pid
            br.count[pid] += 1
            if k < M:
                br.sumk[pid] += k
            else:
                br.ntop[pid] += 1
            if t >= tail_start:
                tail_acc += lam
            x = lam - eta * float(br.grad[pid])
            x = 0.0 if x < 0.0 else (U if x > U else x)
            k = kernels._dual_loop_py.round_to_grid(x, eps, M, U)
        tail[0] = tail_acc

    n = br.n
    count = br.count[:n].copy()
    v_r = np.array(br.v_r)
    v_c = np.array(br.v_c)
    acts = np.array(br.actions, dtype=np.int64).reshape(n, model.num_states)
    trace = DualTrace(
        T=T, b_prime=cfg.b_prime, net=net, policy_actions=acts, v_reward=v_r, v_constraint=v_c,
        count=count, sum_index=br.sumk[:n].copy(), count_top=br.ntop[:n].copy(),
        grid_index=rec_k if record else None, policy_id=rec_pid if record else None,
        final_lambda=net.value(int(k)), tail_mean_lambda=float(tail[0]) / W, tail_length=W,
        planner_calls=br.calls,
    )
    A = model.num_actions
    members = tuple((int(c) / T, Policy.deterministic(a, A)) for a, c in zip(acts, count) if c > 0)
    mixture = MixturePolicy(members)
    weights = count / T
    v_r_hat = float(weights @ v_r)
    v_c_hat = float(weights @ v_c)
    eps_opt = cfg.eps_opt if cfg.eps_opt is not None else 0.0
    saturated = bool(trace.tail_mean_lambda >= U - eps and v_c_hat < cfg.b_prime - eps_opt)
    return PdResult(mixture=mixture, trace=trace, collapsed=collapse_mixture(model, mixture),
                    v_reward_hat=v_r_hat, v_constraint_hat=v_c_hat, config=cfg,
                    backend=backend_name, dual_saturated=saturated)
