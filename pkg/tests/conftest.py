import numpy as np
import pytest

import holotrap.optics as optics
from holotrap import OpticalSystem

PARSEVAL_RTOL = 1e-10


class TransformLog:
    def __init__(self):
        self.count = 0
        self.worst = 0.0


@pytest.fixture(autouse=True)
def parseval_guard(monkeypatch):
    """Check energy conservation on every centered transform a test performs."""
    log = TransformLog()

    def wrap(fn):
        def checked(a):
            out = fn(a)
            e_in = float(np.sum(np.abs(a) ** 2))
            e_out = float(np.sum(np.abs(out) ** 2))
            rel = abs(e_out - e_in) / e_in if e_in > 0 else e_out
            log.count += 1
            log.worst = max(log.worst, rel)
            assert rel <= PARSEVAL_RTOL, f"Parseval violated: relative energy change {rel:.3e}"
            return out

        return checked

    monkeypatch.setattr(optics, "_fft2c", wrap(optics._fft2c))
    monkeypatch.setattr(optics, "_ifft2c", wrap(optics._ifft2c))
    return log


@pytest.fixture(scope="session")
def default_sys():
    return OpticalSystem()


@pytest.fixture(scope="session")
def small_sys():
    # same optics on a coarse grid, for fast property tests
    return OpticalSystem(grid_size=64, slm_pitch=20e-3 / 480 * 8)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
