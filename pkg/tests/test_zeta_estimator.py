import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmdplab.core_mdp import Cmdp, t1_cmdp
from cmdplab.errors import CmdpInputError
from cmdplab.sampling import GenerativeModel
from cmdplab.zeta_estimator import estimate_zeta, log_term, round_sample_size, should_stop, zeta_level

from conftest import random_instance


def test_stop_rule_arithmetic():
    assert should_stop(0.9, 0.5, 0.04)
    assert not should_stop(0.9, 0.5, 0.045)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-3, 1.0), st.floats(0, 3))
def test_stop_rule_monotone(v, b, z, extra):
    if should_stop(v, b, z):
        direction = 1.0 if v >= b else -1.0
        assert should_stop(v + direction * extra, b, z)


def test_t1_halts_at_first_small_enough_level():
    est = estimate_zeta(GenerativeModel(t1_cmdp(), 0), b=0.9, delta=0.1)
    assert est.halted
    assert est.zeta_hat == pytest.approx(0.1, abs=1e-9)
    first = next(i for i in range(40) if 9 * zeta_level(i, 0.5) <= 0.1 + 1e-12)
    assert est.rounds_used == first + 1
    assert est.per_round[-1].i == first


def test_zero_constraint_never_halts():
    m = Cmdp(np.ones((1, 2, 1)), [[1.0, 0.0]], [[0.0, 0.0]], 0.0, [1.0], 0.5)
    est = estimate_zeta(GenerativeModel(m, 0), b=0.0, delta=0.1, max_rounds=5)
    assert not est.halted and est.zeta_hat is None and est.rounds_used == 5


def test_levels_and_query_accounting():
    m = random_instance(5, S=3, A=2, gamma=0.6)
    gm = GenerativeModel(m, 1)
    est = estimate_zeta(gm, b=0.0, delta=0.2, max_rounds=6)
    S, A = 3, 2
    for r in est.per_round:
        assert r.zeta_i == 2.0**-r.i / (1 - 0.6)
        C = math.log(2 * S * A * (r.i + 1) ** 2 / ((1 - 0.6) * r.zeta_i * 0.2))
        assert r.n_i == math.ceil(4.0 * C / ((1 - 0.6) ** 3 * r.zeta_i**2))
    ns = [r.n_i for r in est.per_round]
    assert all(b > a for a, b in zip(ns, ns[1:]))
    assert est.total_queries == sum(ns) * S * A == gm.query_count


def test_sample_size_scales_inverse_square():
    for i in range(1, 8):
        prev = round_sample_size(i - 1, 4, 2, 0.9, 0.1)
        ratio = round_sample_size(i, 4, 2, 0.9, 0.1) / prev
        expected = 4 * log_term(i, 4, 2, 0.9, 0.1) / log_term(i - 1, 4, 2, 0.9, 0.1)
        # ceiling rounding perturbs each size by less than one sample
        assert ratio == pytest.approx(expected, rel=2.0 / prev)


def test_overflow_guard():
    m = Cmdp(np.ones((1, 1, 1)), [[0.0]], [[0.0]], 0.0, [1.0], 0.99)
    est = estimate_zeta(GenerativeModel(m, 0), b=0.0, delta=0.1, max_rounds=60)
    assert not est.halted and "int64" in est.reason


@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(delta=1.0), dict(max_rounds=0), dict(kappa_zeta=0.0)])
def test_input_errors(kw):
    with pytest.raises(CmdpInputError):
        estimate_zeta(GenerativeModel(t1_cmdp(), 0), **kw)
