import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmdplab import _dual_loop_py, kernels

needs_compiled = pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernel not built")


def test_python_backend_always_available():
    assert kernels.get_kernel("python") is _dual_loop_py


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_kernel("fortran")


def test_env_forces_python(monkeypatch):
    monkeypatch.setenv("CMDPLAB_BACKEND", "python")
    assert kernels.default_backend() == "python"


@needs_compiled
@settings(max_examples=500, deadline=None)
@given(st.floats(0, 1), st.floats(1e-6, 1.0), st.floats(0.01, 1e3))
def test_rounding_is_bit_identical(pos, frac, U):
    from cmdplab import _dual_loop
    eps = frac * U
    M = int(U / eps) + 1
    x = pos * U
    assert _dual_loop.round_to_grid(x, eps, M, U) == _dual_loop_py.round_to_grid(x, eps, M, U)


def _state(n_pol, T, seed):
    rng = np.random.default_rng(seed)
    lo = np.sort(rng.uniform(0, 2, n_pol))
    hi = lo + rng.uniform(0, 1, n_pol)
    lo[0] = 0.0
    hi[-1] = 10.0
    grad = rng.uniform(-1, 1, n_pol)
    z = lambda dt: np.zeros(n_pol, dtype=dt)
    return dict(lo=lo, hi=hi, grad=grad, count=z(np.int64), sumk=z(np.int64), ntop=z(np.int64),
                tail=np.zeros(1), rec_k=np.zeros(T, dtype=np.int64), rec_pid=np.zeros(T, dtype=np.int32))


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_advance_matches_fallback(seed):
    from cmdplab import _dual_loop
    T, n_pol = 5000, 6
    outs = []
    for mod in (_dual_loop, _dual_loop_py):
        s = _state(n_pol, T, seed)
        ret = mod.advance(0, T, 0, -1, 0.003, 1000, 3.0, 0.01, s["lo"], s["hi"], s["grad"], n_pol,
                          s["count"], s["sumk"], s["ntop"], T - 100, s["tail"], s["rec_k"], s["rec_pid"], True)
        outs.append((ret, s))
    (r1, s1), (r2, s2) = outs
    assert r1 == r2
    for key in ("count", "sumk", "ntop", "tail", "rec_k", "rec_pid"):
        assert np.array_equal(s1[key], s2[key]), key


def test_advance_stops_when_uncovered():
    s = _state(1, 10, 0)
    s["lo"][:] = 0.0
    s["hi"][:] = 0.05
    s["grad"][:] = -1.0  # lambda climbs out of the only interval
    t, k, cur, need = _dual_loop_py.advance(0, 10, 0, -1, 0.01, 100, 1.0, 0.02, s["lo"], s["hi"], s["grad"], 1,
                                             s["count"], s["sumk"], s["ntop"], 0, s["tail"], s["rec_k"],
                                             s["rec_pid"], True)
    assert need and cur == -1
    assert k * 0.01 > 0.05
    assert s["count"][0] == t
