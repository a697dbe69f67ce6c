import numpy as np
import pytest

from monotrend import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(autouse=True)
def _private_cache(tmp_path, monkeypatch):
    # keep unit tests away from the user's quantile cache
    monkeypatch.setenv("MONOTREND_CACHE", str(tmp_path / "cache"))


@pytest.fixture(scope="session")
def shared_cache(pytestconfig):
    """Cache directory kept between runs (for the expensive quantile tables)."""
    return pytestconfig.cache.mkdir("monotrend-quantiles")


BACKENDS = [pytest.param(kernels.NUMPY, id="numpy")]
if kernels.NUMBA is not None:
    BACKENDS.append(pytest.param(kernels.NUMBA, id="numba"))


_ACCEPTANCE = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""

    def record(number: int, ok: bool, text: str):
        _ACCEPTANCE.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"))
        assert ok, text

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
