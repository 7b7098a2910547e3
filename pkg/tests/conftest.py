import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fmofdm.waveform import FmParams, OfdmConfig

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cfg():
    """Narrowband block numerology: N=512, CP=64, F_s=15.36 MHz, tones 1..64."""
    return OfdmConfig.with_cutoff(64)


@pytest.fixture
def fm06(cfg):
    return FmParams.from_phase_index(0.6, cfg.sample_rate)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report():
    def _report(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
