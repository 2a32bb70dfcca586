import numpy as np
import pytest

from photon_presence import ExperimentParams, ModelKind


@pytest.fixture
def defaults():
    return ExperimentParams()


@pytest.fixture
def small_params():
    """Few windows, few photons: cheap and exact-checkable."""
    return ExperimentParams(ns=20, n_windows=5)


@pytest.fixture(params=["ba", "localized_l1", "localized_l4"])
def time_model(request):
    return ModelKind.from_value(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
