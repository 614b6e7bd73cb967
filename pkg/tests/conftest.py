import numpy as np
import pytest

from clocksync import state_engine
from clocksync.channel_algebra import PAULIS


def kraus_to_ptm(kraus):
    """Independent transfer-matrix oracle: M[eta, xi] = Tr(s_eta E(s_xi)) / 2."""
    basis = [PAULIS[k] for k in "IZXY"]
    m = np.zeros((4, 4))
    for xi, sx in enumerate(basis):
        out = sum(k @ sx @ k.conj().T for k in kraus)
        for eta, se in enumerate(basis):
            m[eta, xi] = 0.5 * np.trace(se @ out).real
    return m


def random_density(n, rng):
    g = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_operator(rng, dim=2):
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def debug_checks(monkeypatch):
    monkeypatch.setattr(state_engine, "DEBUG_CHECKS", True)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
