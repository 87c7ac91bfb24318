"""Lower-bound CMDP family: a null model M0 and alternatives M_{i,a}.

Layout (``S = 2**m - 1``):

* routing states ``o_0 .. o_{2S}`` form a complete binary tree; ``o_j`` for
  ``j < S`` has actions a0 -> ``o_{2j+1}`` and a1 -> ``o_{2j+2}``, and leaf
  ``o_{S+k}`` moves to gate ``s_k``;
* gadget ``k = 0..S`` holds ``s_k, s~_k, z_k, z'_k``. From ``s_k`` action
  ``a_l`` enters ``s~_k`` and ``a_r`` enters ``z'_k``. ``s~_k`` self-loops with
  probability ``p_{k,a}`` (else falls to the absorbing ``z_k``) and pays reward
  1, constraint ``u``. ``z'_k`` loops forever paying constraint ``c_gate``.

Every gate is reached after exactly ``m + 1`` deterministic steps, so its
discounted occupancy is ``gamma**(m+1)``. ``u`` and ``c_gate`` are normalized by
``gamma**(m+2)`` so that the all-``a_r`` policy reaches constraint value exactly
``b + zeta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_mdp import Cmdp
from .errors import CmdpInputError
from .lp_oracle import slater_constant

GAMMA_PATH_CONST = 4  # gamma >= 1 - 1/(GAMMA_PATH_CONST * m)


@dataclass(frozen=True)
class HardInstanceParams:
    m: int
    num_actions: int
    gamma: float
    b: float
    zeta: float
    x: float | None = None
    c1: float = 2.0
    c2: float = 1.0
    c3: float = 2.0
    epsilon: float | None = None

    @property
    def num_gates(self) -> int:
        """``S``: gadgets are indexed ``0..S``."""
        return 2**self.m - 1

    @property
    def offset(self) -> float:
        return self.zeta / 2 if self.x is None else self.x

    @property
    def accuracy(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        eps = 0.05 / ((1 - self.gamma) * self.zeta)
        return min(eps, 1 / (1 - self.gamma))


@dataclass(frozen=True)
class InstanceVariant:
    """``gate is None`` for the null model, else the alternative ``(gate, action)``."""

    gate: int | None = None
    action: int | None = None

    @classmethod
    def null(cls):
        return cls()

    @classmethod
    def alternative(cls, i, a):
        return cls(int(i), int(a))

    @property
    def is_null(self):
        return self.gate is None

    @classmethod
    def parse(cls, text: str):
        if text.strip().lower() == "null":
            return cls.null()
        try:
            i, a = (int(v) for v in text.split(","))
        except ValueError:
            raise CmdpInputError(f"variant must be 'null' or 'i,a', got {text!r}") from None
        return cls.alternative(i, a)


@dataclass(frozen=True)
class HardInstanceReport:
    valid: bool
    violations: tuple
    q0: float = math.nan
    q1: float = math.nan
    q2: float = math.nan
    alpha1: float = math.nan
    alpha2: float = math.nan
    u: float = math.nan
    eps_prime: float = math.nan
    eps1: float = math.nan
    eps2: float = math.nan
    c_gate: float = math.nan

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["violations"] = list(self.violations)
        return d


def validate_params(p: HardInstanceParams) -> HardInstanceReport:
    bad = []
    if int(p.m) != p.m or p.m < 1:
        return HardInstanceReport(False, (f"m must be a positive integer, got {p.m!r}",))
    if p.num_actions < 1:
        return HardInstanceReport(False, (f"num_actions must be >= 1, got {p.num_actions!r}",))
    g = p.gamma
    if not (0 < g < 1):
        return HardInstanceReport(False, (f"gamma must lie in (0, 1), got {g!r}",))
    g_min = max(0.6, 1 - 1 / (GAMMA_PATH_CONST * p.m))
    if g < g_min:
        bad.append(f"gamma >= {g_min:.6g} required for m={p.m}")
    if not (p.zeta > 0):
        bad.append("zeta > 0")
    x = p.offset
    eps = p.accuracy
    if not (0 < eps <= 1 / (1 - g) * (1 + 1e-12)):
        bad.append("epsilon in (0, 1/(1-gamma)]")
    q0 = (1 - p.c1 * (1 - g)) / g
    if not (0 < q0 < 1):
        bad.append("q0 in (0, 1)")
        return HardInstanceReport(False, tuple(bad), q0=q0)
    eps_prime = (1 - g) * p.zeta * eps
    a1 = p.c2 * (1 - g * q0) ** 2 * eps_prime / g
    a2 = p.c3 * (1 - g * q0) ** 2 * eps_prime / g
    q1, q2 = q0 + a1, q0 + a2
    if not (a1 < a2):
        bad.append("alpha1 < alpha2")
    for name, val in (("alpha1/q0", a1 / q0), ("alpha1/(1-q0)", a1 / (1 - q0)),
                      ("alpha2/q0", a2 / q0), ("alpha2/(1-q0)", a2 / (1 - q0))):
        if not (0 < val < 0.5):
            bad.append(f"{name} in (0, 1/2)")
    base = p.b - x
    e1 = base * ((1 - g * q0) / (1 - g * q1) - 1)
    e2 = base * ((1 - g * q0) / (1 - g * q2) - 1)
    if not (base < base + e1 < base + e2 < p.b):
        bad.append("b - x < b - x + eps1 < b - x + eps2 < b")
    depth = g ** (p.m + 2)
    u = (1 - g * q0) * base / depth
    if not (u >= 0):
        bad.append("u >= 0")
    c_gate = (p.b + p.zeta) * (1 - g) / depth
    return HardInstanceReport(not bad, tuple(bad), q0, q1, q2, a1, a2, u, eps_prime, e1, e2, c_gate)


def _require_valid(p):
    rep = validate_params(p)
    if not rep.valid:
        raise CmdpInputError("invalid hard-instance parameters: " + "; ".join(rep.violations))
    return rep


def state_index(p: HardInstanceParams):
    """Map of state names (``o3``, ``s0``, ``st0``, ``z0``, ``zp0``) to indices."""
    S = p.num_gates
    idx = {f"o{j}": j for j in range(2 * S + 1)}
    for k in range(S + 1):
        base = 2 * S + 1 + 4 * k
        idx[f"s{k}"], idx[f"st{k}"], idx[f"z{k}"], idx[f"zp{k}"] = base, base + 1, base + 2, base + 3
    return idx


def gate_path(m: int, k: int):
    """Routing states from ``o_0`` to the leaf above gate ``s_k``."""
    S = 2**m - 1
    if not 0 <= k <= S:
        raise CmdpInputError(f"gate {k} out of range 0..{S}")
    node, path = S + k, []
    while node > 0:
        path.append(node)
        node = (node - 1) // 2
    path.append(0)
    return path[::-1]


def build_hard_instance(p: HardInstanceParams, variant: InstanceVariant | None = None) -> Cmdp:
    rep = _require_valid(p)
    variant = variant or InstanceVariant.null()
    S = p.num_gates
    A_in = int(p.num_actions)
    if not variant.is_null and not (1 <= variant.gate <= S and 0 <= variant.action < A_in):
        raise CmdpInputError(f"alternative (i={variant.gate}, a={variant.action}) out of range: "
                             f"need 1 <= i <= {S}, 0 <= a < {A_in}")
    A = max(A_in, 2)
    n = (2 * S + 1) + 4 * (S + 1)
    P = np.zeros((n, A, n))
    r = np.zeros((n, A))
    c = np.zeros((n, A))
    idx = state_index(p)

    def add(s, a, s_next, prob=1.0):
        P[s, a, s_next] += prob

    for j in range(2 * S + 1):
        for a in range(A):
            if j < S:
                add(j, a, 2 * j + 1 + (1 if a == 1 else 0))
            else:
                add(j, a, idx[f"s{j - S}"])
    for k in range(S + 1):
        s, st, z, zp = idx[f"s{k}"], idx[f"st{k}"], idx[f"z{k}"], idx[f"zp{k}"]
        for a in range(A):
            add(s, a, zp if a == 1 else st)  # a_l = 0, a_r = 1
            add(z, a, z)
            add(zp, a, zp)
            c[zp, a] = rep.c_gate
            # s~_0 has one real action; padding copies action 0
            real = 0 if (k == 0 or a >= A_in) else a
            if k == 0:
                q = rep.q1
            elif not variant.is_null and k == variant.gate and real == variant.action:
                q = rep.q2
            else:
                q = rep.q0
            add(st, a, st, q)
            add(st, a, z, 1 - q)
            r[st, a] = 1.0
            c[st, a] = rep.u
    rho = np.zeros(n)
    rho[0] = 1.0
    return Cmdp(P, r, c, p.b, rho, p.gamma, r_max=1.0, c_max=max(1.0, float(c.max())))


def closed_form_optima(p: HardInstanceParams):
    """``(v_null, v_alt)``: optimal rewards of M0 and of any alternative M_{i,a}."""
    rep = _require_valid(p)
    g, z, x = p.gamma, p.zeta, p.offset
    scale = g ** (p.m + 2)
    v_null = z / (z + x - rep.eps1) * scale / (1 - g * rep.q1)
    v_alt = z / (z + x - rep.eps2) * scale / (1 - g * rep.q2)
    return v_null, v_alt


def verify_slater(p: HardInstanceParams, variant: InstanceVariant | None = None) -> float:
    return slater_constant(build_hard_instance(p, variant))
