import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dflab.model import ModelConfig, build_model
from dflab.params import PhysParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid_params():
    return PhysParams(alpha=0.5, c=20.0, Z=2.0, q=2)


@pytest.fixture(scope="session")
def grid_model(grid_params):
    return build_model(ModelConfig(backend="dirac1d", N=32, box_len=12.0), grid_params)


@pytest.fixture(scope="session")
def synth_params():
    return PhysParams(alpha=0.5, c=10.0, Z=0.5, q=2)


@pytest.fixture(scope="session")
def synth_model(synth_params):
    return build_model(ModelConfig(backend="synthetic", synth_dim=16, seed=3), synth_params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_herm(rng, n, scale=1.0):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (z + z.conj().T)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
