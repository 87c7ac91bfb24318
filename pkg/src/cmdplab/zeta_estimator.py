"""Doubling estimate of the Slater constant from a generative model.

Round ``i`` uses ``zeta_i = 2**-i / (1 - gamma)`` and a fresh batch of
``N_i`` samples per pair, computes the empirical optimal constraint value, and
stops as soon as it is at least ``9 zeta_i`` away from the threshold ``b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_mdp import solve_mdp
from .errors import CmdpInputError
from .sampling import GenerativeModel

DEFAULT_KAPPA = 4.0
STOP_FACTOR = 9.0
MAX_SAMPLES_PER_PAIR = 2**62


@dataclass(frozen=True)
class ZetaRound:
    i: int
    zeta_i: float
    n_i: int
    v_hat: float


@dataclass(frozen=True)
class ZetaEstimate:
    zeta_hat: float | None
    halted: bool
    rounds_used: int
    total_queries: int
    per_round: tuple = field(default_factory=tuple)
    reason: str = ""

    def to_dict(self):
        return {
            "zeta_hat": self.zeta_hat,
            "halted": self.halted,
            "rounds_used": self.rounds_used,
            "total_queries": self.total_queries,
            "reason": self.reason,
            "per_round": [r.__dict__ for r in self.per_round],
        }


def zeta_level(i: int, gamma: float) -> float:
    return 2.0**-i / (1 - gamma)


def log_term(i, S, A, gamma, delta):
    """``log(2 S A (i+1)^2 / ((1-gamma) zeta_i delta))``."""
    return math.log(2 * S * A * (i + 1) ** 2 / ((1 - gamma) * zeta_level(i, gamma) * delta))


def round_sample_size(i, S, A, gamma, delta, kappa_zeta=DEFAULT_KAPPA, c_max=1.0) -> int:
    z = zeta_level(i, gamma)
    return int(math.ceil(kappa_zeta * c_max * log_term(i, S, A, gamma, delta) / ((1 - gamma) ** 3 * z**2)))


def should_stop(v_hat, b, zeta_i) -> bool:
    return abs(v_hat - b) >= STOP_FACTOR * zeta_i


def estimate_zeta(gm: GenerativeModel, b: float | None = None, delta: float = 0.1,
                  kappa_zeta: float = DEFAULT_KAPPA, max_rounds: int = 30) -> ZetaEstimate:
    if not (0 < delta < 1):
        raise CmdpInputError(f"delta must lie in (0, 1), got {delta!r}")
    if max_rounds < 1:
        raise CmdpInputError(f"max_rounds must be >= 1, got {max_rounds!r}")
    if not (kappa_zeta > 0):
        raise CmdpInputError(f"kappa_zeta must be > 0, got {kappa_zeta!r}")
    b = gm.b if b is None else float(b)
    S, A, gamma = gm.num_states, gm.num_actions, gm.gamma
    rounds = []
    queries = 0
    for i in range(max_rounds):
        z = zeta_level(i, gamma)
        n = round_sample_size(i, S, A, gamma, delta, kappa_zeta, gm.c_max)
        if n > MAX_SAMPLES_PER_PAIR:
            return ZetaEstimate(None, False, i, queries, tuple(rounds),
                                reason=f"round {i} needs {n} samples per pair, beyond the int64 range")
        counts, _ = gm.draw_counts(n)
        queries += n * S * A
        _, V = solve_mdp(counts / n, gm.constraints, gamma)
        v_hat = float(np.asarray(gm.rho) @ V)
        rounds.append(ZetaRound(i, z, n, v_hat))
        if should_stop(v_hat, b, z):
            return ZetaEstimate(abs(v_hat - b), True, i + 1, queries, tuple(rounds), reason="halted")
    return ZetaEstimate(None, False, max_rounds, queries, tuple(rounds),
                        reason="max_rounds exhausted; zeta may be ~0 or the budget too small")
