import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oqpsk_burst.config import ModemConfig
from oqpsk_burst.pulses import make_beta, make_pulses

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return ModemConfig()


@pytest.fixture(scope="session")
def pulses(cfg):
    return make_pulses(cfg)


@pytest.fixture(scope="session")
def beta(cfg, pulses):
    return make_beta(cfg, pulses)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
