import pytest

from moegps.config import load_run_config
from moegps.domain import HardwareConfig, ModelConfig

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def mixtral():
    return ModelConfig(4096, 14336, 32, 8, 8, top_k=2, sliding_window=4096, num_layers=32)


@pytest.fixture
def compute_hw():
    """Bandwidth so large that every GEMM is compute-bound."""
    return HardwareConfig(4, 312e12, 1e30, 2e12, 1.0)


@pytest.fixture
def ref_nvlink():
    return load_run_config("mixtral_nvlink.json")


@pytest.fixture
def ref_pcie():
    return load_run_config("mixtral_pcie.json")
