"""Shared fixtures.  The long reference integrations are computed once per session."""

import time

import numpy as np
import pytest

from vortexgerm.curve import circle_state
from vortexgerm.hes import HesConfig, integrate
from vortexgerm.nlse import SolverConfig, evolve
from vortexgerm.steady import solve_steady
from vortexgerm.symbols import gpe_symbols, reference_params
from vortexgerm.wavefield import build_initial_psi

# frozen output of solve_steady at the reference parameters (Newton, multi-start)
GOLDEN_STEADY = dict(Rbar=3.0726080045030635, Prbar=3.254564196065522,
                     omegabar=0.881562378737677, mubar0=0.24831945026760344)


@pytest.fixture(scope="session")
def params():
    return reference_params()


@pytest.fixture(scope="session")
def steady(params):
    return solve_steady(params)


def _hes(params, Lambda, t_end=3.0, Ns=256, dt=1e-3):
    p = params.with_(Lambda=Lambda)
    c0 = circle_state(p.R, p.Pr, p.mu0, Ns)
    cfg = HesConfig(dt=dt, t_end=t_end, Ns=Ns, save_every=250, monitor_every=10)
    start = time.perf_counter()
    res = integrate(c0, gpe_symbols(p), p.Lambda, p.kappa, cfg)
    res.elapsed = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def hes_reference(params):
    """Reference-parameter HES run, Ns=256, dt=1e-3, t in [0, 3]."""
    return _hes(params, params.Lambda)


@pytest.fixture(scope="session")
def hes_closed(params):
    """Same run with Lambda = 0."""
    return _hes(params, 0.0)


def _nlse(params, nx=128, dt=5e-4, t_end=3.0, L=8.0):
    cfg = SolverConfig(params=params, nx=nx, ny=nx, Lx=L, Ly=L, dt=dt, t_end=t_end,
                       save_every=int(round(0.25 / dt)), monitor_every=int(round(0.05 / dt)))
    f0 = build_initial_psi(params, nx, nx, L, L)
    start = time.perf_counter()
    res = evolve(f0, cfg)
    res.elapsed = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def nlse_reference(params):
    """Reference NLSE run, 128^2, L=8, dt=5e-4, t in [0, 3]."""
    return _nlse(params)


@pytest.fixture(scope="session")
def nlse_runner():
    return _nlse


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
