import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from readi_lab.beamform import BeamformConfig, ImagingGrid
from readi_lab.simulate import ArrayGeometry, PulseDefinition, ScattererScene

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

C = 1540.0
F0 = 4.3e6
WAVELENGTH = C / F0


@pytest.fixture
def probe16():
    return ArrayGeometry(16, WAVELENGTH), PulseDefinition(F0)


@pytest.fixture
def point_scene():
    return ScattererScene([[0.0, 10e-3]], speed_of_sound=C)


@pytest.fixture
def small_grid():
    return ImagingGrid.centered(24, 24, 0.1e-3, 10e-3)


@pytest.fixture
def bf_cfg():
    return BeamformConfig(speed_of_sound=C)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULT_LINES
    except ImportError:
        return
    if RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in RESULT_LINES:
            terminalreporter.write_line(line)
