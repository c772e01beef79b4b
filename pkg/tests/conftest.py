import numpy as np
import pytest
from scipy.stats import unitary_group

from spdcring import gaussian
from spdcring.model import default_params


def small_params(energy_pJ=0.05, eta=0.95, **kw):
    """Coarse grids for fast unit tests."""
    kw.setdefault("n_k", 11)
    kw.setdefault("n_k_pump", 21)
    return default_params(pump_energy=energy_pJ * 1e-12, **kw).with_escape(eta)


def _unitary(n, rng):
    if n == 1:
        return np.exp(2j * np.pi * rng.random((1, 1)))
    return unitary_group.rvs(n, random_state=rng)


def bogoliubov_state(n_s, n_i, r, seed, t=0.0):
    """Gaussian state assembled from random unitaries and squeezing parameters."""
    rng = np.random.default_rng(seed)
    n = min(n_s, n_i)
    fs = _unitary(n_s, rng)
    gs = _unitary(n_s, rng)
    fi = _unitary(n_i, rng)
    gi = _unitary(n_i, rng)
    rr = np.zeros(max(n_s, n_i))
    rr[:n] = np.sort(np.abs(r))[::-1][:n]
    cs = np.diag(np.cosh(rr[:n_s]))
    ci = np.diag(np.cosh(rr[:n_i]))
    ss = np.zeros((n_s, n_i))
    ss[:n, :n] = np.diag(np.sinh(rr[:n]))
    v_ss = fs @ cs @ gs
    v_ii = np.conj(fi) @ ci @ np.conj(gi)
    w_si = fs @ ss @ gi
    w_is = np.conj(fi) @ ss.T @ np.conj(gs)
    return gaussian.GaussianState(t, np.zeros(1, complex), v_ss, v_ii, w_si, w_is)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def record(cid, ok, detail):
    line = f"criterion {cid:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
