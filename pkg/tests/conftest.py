import numpy as np
import pytest

from levitodyn import SystemParams, build_drift, is_stable
from levitodyn.presets import balanced_2d, detuning_base, strong_1d


def random_stable_params(rng, max_tries=1000):
    """Red-detuned draw around the experimental regime, rejected until stable."""
    for _ in range(max_tries):
        p = SystemParams.from_hz(
            kappa_hz=rng.uniform(30e3, 100e3),
            detuning_hz=rng.uniform(-200e3, -60e3),
            omega_x_hz=rng.uniform(80e3, 160e3),
            omega_y_hz=rng.uniform(80e3, 160e3),
            g_x_hz=rng.uniform(0, 30e3),
            g_y_hz=rng.uniform(0, 30e3),
            gamma_m_hz=10 ** rng.uniform(0, 3),
            gamma_x_hz=10 ** rng.uniform(2, 4.3),
            gamma_y_hz=10 ** rng.uniform(2, 4.3),
            eta=rng.uniform(0.1, 1.0),
        )
        if is_stable(build_drift(p)):
            return p
    raise RuntimeError("no stable draw")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def strong():
    return strong_1d()


@pytest.fixture(scope="session")
def theory():
    return detuning_base()


@pytest.fixture(scope="session")
def balanced():
    return balanced_2d()


@pytest.fixture
def decoupled():
    return SystemParams.from_hz(
        detuning_hz=-120e3, kappa_hz=57e3, omega_x_hz=128e3, omega_y_hz=115e3,
        g_x_hz=0.0, g_y_hz=0.0, gamma_m_hz=50.0, gamma_x_hz=3e3, gamma_y_hz=2e3,
    )


# --- acceptance report -----------------------------------------------------------

def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def report(request):
    """``report(label, ok, detail)`` records a PASS/FAIL line, then asserts ``ok``."""
    lines = request.config.acceptance_lines

    def _report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
