import numpy as np
import pytest

from cmdplab.core_mdp import Cmdp, Policy, t1_cmdp


def random_instance(seed, S=None, A=None, gamma=None, b=None):
    rng = np.random.default_rng(seed)
    S = S or int(rng.integers(1, 7))
    A = A or int(rng.integers(1, 4))
    gamma = rng.uniform(0.3, 0.95) if gamma is None else gamma
    P = rng.dirichlet(np.ones(S), size=(S, A))
    r = rng.uniform(0, 1, (S, A))
    c = rng.uniform(0, 1, (S, A))
    rho = rng.dirichlet(np.ones(S))
    return Cmdp(P, r, c, 0.0 if b is None else b, rho, gamma)


def random_policy(rng, S, A):
    return Policy(rng.dirichlet(np.ones(A), size=S))


@pytest.fixture
def t1():
    return t1_cmdp()


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """``report(name, ok, detail)`` records one PASS/FAIL line for the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def _report(name, ok, detail=""):
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)
