import numpy as np
import pytest

from mpa_codebook import kernels
from mpa_codebook.channel import ArrayConfig, ScenarioParams, generate_channels, line_panel_order


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run a test once per available search backend."""
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture(scope="session")
def desk():
    return ArrayConfig()


@pytest.fixture(scope="session")
def desk_channels(desk):
    """200 user channels of the default array in port order."""
    rng = np.random.default_rng(2024)
    return np.concatenate([generate_channels(desk, ScenarioParams(), rng) for _ in range(67)])[:200]


@pytest.fixture(scope="session")
def desk_panel_major(desk, desk_channels):
    return desk_channels[:, line_panel_order(desk)]


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record and assert one acceptance criterion: ``acceptance(label, ok, detail)``."""
    def check(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
