import sys

import numpy as np
import pytest

from vanhove.charfunc import SystemInitState
from vanhove.reservoir import CorrelationVector, MixingState, Perturbation, TestFunction
from vanhove.spectral import SpectralModel


@pytest.fixture(scope="session")
def ohmic():
    return SpectralModel.ohmic()


@pytest.fixture(scope="session")
def small():
    """Correlated scenario on a coarse grid, shared by the pipeline tests."""
    model = SpectralModel.ohmic(n_points=512)
    grid = model.grid
    state = MixingState.thermal(grid, 1.0)
    pert = Perturbation.gaussian_bumps(grid, [(0.3, 1.5, 0.3)])
    xi = CorrelationVector.gaussian(grid, 1.2, 0.3, 0.3)
    probes = (TestFunction.gaussian(grid, 1.0, 0.4, normalized=True),
              TestFunction.gaussian(grid, 2.0, 0.5, normalized=True))
    return model, state, pert, xi, SystemInitState(0.5 + 0.2j, 1.0), probes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
