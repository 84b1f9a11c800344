import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hpfts.demog_data import synth_pair

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def geometric_pair():
    return synth_pair(1.02, n=51, sigma=0.0)


@pytest.fixture(scope="session")
def noisy_pair():
    return synth_pair(1.01, n=40, sigma=0.01, seed=3, region="NOI")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[tuple[int, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it, then assert on it."""

    def report(num: int, ok: bool, detail: str):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append((num, line))
        print(line)
        assert ok, line

    def skip(num: int, why: str):
        _CRITERIA.append((num, f"criterion {num:>2}: SKIP  {why}"))
        pytest.skip(why)

    report.skip = skip
    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
