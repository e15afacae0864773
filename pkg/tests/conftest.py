import numpy as np
import pytest

from sketchjack import _accel


@pytest.fixture(params=[True, False], ids=["numba", "numpy"])
def use_numba(request):
    if request.param and not _accel.NUMBA_AVAILABLE:
        pytest.skip("numba not installed")
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



_ACCEPTANCE = []


@pytest.fixture(scope="session")
def record_criterion():
    """Append ``(number, passed, detail)``; the terminal summary prints one line each."""
    def record(number, passed, detail):
        _ACCEPTANCE.append((number, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
