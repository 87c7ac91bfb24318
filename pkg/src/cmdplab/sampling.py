"""Generative-model access and the empirical (plug-in) CMDP.

Every ``(s, a)`` pair draws from its own Philox stream keyed on
``(master_seed, batch, s, a)``. Results therefore do not depend on the order
in which pairs are sampled, and each call to :func:`build_empirical_model`
uses a fresh batch so repeated estimation rounds never reuse samples.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core_mdp import Cmdp
from .errors import CmdpInputError

# batch id reserved for one-at-a-time draws
_SINGLE_DRAW_BATCH = 2**32 - 1


def _stream(master_seed, batch, s, a):
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), batch, s, a])
    return np.random.Generator(np.random.Philox(ss))


class GenerativeModel:
    """Sampling oracle around a hidden CMDP.

    Planners only see what the problem setup treats as known: rewards,
    constraint rewards, threshold, initial distribution and discount.
    """

    def __init__(self, truth: Cmdp, master_seed: int):
        self._truth = truth
        self.master_seed = int(master_seed)
        self._count = 0
        self._batches = 0
        self._single = {}
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    @property
    def num_states(self):
        return self._truth.num_states

    @property
    def num_actions(self):
        return self._truth.num_actions

    @property
    def rewards(self):
        return self._truth.rewards

    @property
    def constraints(self):
        return self._truth.constraints

    @property
    def rho(self):
        return self._truth.rho

    @property
    def gamma(self):
        return self._truth.gamma

    @property
    def b(self):
        return self._truth.b

    @property
    def r_max(self):
        return self._truth.r_max

    @property
    def c_max(self):
        return self._truth.c_max

    def _check_pair(self, s, a):
        if not (0 <= s < self.num_states and 0 <= a < self.num_actions):
            raise CmdpInputError(f"state-action ({s}, {a}) out of range")

    def sample_next_state(self, s: int, a: int) -> int:
        self._check_pair(s, a)
        with self._lock:
            rng = self._single.get((s, a))
            if rng is None:
                rng = self._single[(s, a)] = _stream(self.master_seed, _SINGLE_DRAW_BATCH, s, a)
            nxt = int(rng.choice(self.num_states, p=self._truth.transitions[s, a]))
            self._count += 1
        return nxt

    def draw_counts(self, n: int) -> tuple[np.ndarray, int]:
        """``n`` fresh next-state samples for every pair, as counts ``[s][a][s']``.

        Counts of ``n`` i.i.d. categorical draws are multinomial, so they are
        drawn directly; the query count still advances by ``n`` per pair.
        """
        S, A = self.num_states, self.num_actions
        with self._lock:
            batch = self._batches
            self._batches += 1
        counts = np.zeros((S, A, S), dtype=np.int64)
        P = self._truth.transitions
        for s in range(S):
            for a in range(A):
                counts[s, a] = _stream(self.master_seed, batch, s, a).multinomial(n, P[s, a])
        with self._lock:
            self._count += n * S * A
        return counts, batch


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    counts: np.ndarray
    n_per_sa: int
    rewards: np.ndarray
    perturbed_rewards: np.ndarray
    constraints: np.ndarray
    rho: np.ndarray
    gamma: float
    b: float
    b_prime: float
    omega: float
    r_max: float = 1.0
    c_max: float = 1.0
    master_seed: int | None = None
    batch: int | None = None
    perturb_seed: int | None = None

    @property
    def p_hat(self) -> np.ndarray:
        return self.counts / self.n_per_sa

    @property
    def num_states(self):
        return self.counts.shape[0]

    @property
    def num_actions(self):
        return self.counts.shape[1]

    def as_cmdp(self) -> Cmdp:
        """The empirical CMDP <S, A, P_hat, r_p, c, b', rho, gamma>."""
        return Cmdp(self.p_hat, self.perturbed_rewards, self.constraints, self.b_prime,
                    self.rho, self.gamma, r_max=self.r_max + self.omega, c_max=self.c_max)

    def to_dict(self):
        return {
            "counts": self.counts.tolist(),
            "n_per_sa": self.n_per_sa,
            "rewards": self.rewards.tolist(),
            "perturbed_rewards": self.perturbed_rewards.tolist(),
            "constraints": self.constraints.tolist(),
            "rho": self.rho.tolist(),
            "gamma": self.gamma,
            "b": self.b,
            "b_prime": self.b_prime,
            "omega": self.omega,
            "r_max": self.r_max,
            "c_max": self.c_max,
            "master_seed": self.master_seed,
            "batch": self.batch,
            "perturb_seed": self.perturb_seed,
        }

    @classmethod
    def from_dict(cls, d):
        counts = np.array(d["counts"], dtype=np.int64)
        n = int(d["n_per_sa"])
        if counts.ndim != 3 or np.any(counts < 0) or np.any(counts.sum(axis=2) != n):
            raise CmdpInputError("counts: every (s, a) row must be nonnegative and sum to n_per_sa")
        return cls(
            counts=counts, n_per_sa=n,
            rewards=np.array(d["rewards"], dtype=float),
            perturbed_rewards=np.array(d["perturbed_rewards"], dtype=float),
            constraints=np.array(d["constraints"], dtype=float),
            rho=np.array(d["rho"], dtype=float),
            gamma=float(d["gamma"]), b=float(d["b"]), b_prime=float(d["b_prime"]),
            omega=float(d["omega"]), r_max=float(d.get("r_max", 1.0)),
            c_max=float(d.get("c_max", 1.0)), master_seed=d.get("master_seed"),
            batch=d.get("batch"), perturb_seed=d.get("perturb_seed"),
        )


def perturb_rewards(r, omega, seed) -> np.ndarray:
    """``r + xi`` with ``xi`` i.i.d. uniform on ``[0, omega]``."""
    if omega < 0:
        raise CmdpInputError(f"omega must be >= 0, got {omega!r}")
    r = np.asarray(r, dtype=float)
    if omega == 0:
        return r.copy()
    rng = np.random.default_rng(seed)
    xi = rng.uniform(0.0, omega, size=r.shape)
    return np.minimum(r + xi, r + omega)


def build_empirical_model(gm: GenerativeModel, n: int, omega: float, b_prime: float,
                          perturb_seed: int) -> EmpiricalModel:
    if n < 1:
        raise CmdpInputError(f"samples per pair must be >= 1, got {n}")
    if omega < 0:
        raise CmdpInputError(f"omega must be >= 0, got {omega!r}")
    counts, batch = gm.draw_counts(int(n))
    return EmpiricalModel(
        counts=counts, n_per_sa=int(n),
        rewards=np.array(gm.rewards), perturbed_rewards=perturb_rewards(gm.rewards, omega, perturb_seed),
        constraints=np.array(gm.constraints), rho=np.array(gm.rho), gamma=gm.gamma,
        b=gm.b, b_prime=float(b_prime), omega=float(omega), r_max=gm.r_max, c_max=gm.c_max,
        master_seed=gm.master_seed, batch=batch, perturb_seed=perturb_seed,
    )
