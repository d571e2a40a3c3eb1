import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ksexplain.survival import Dataset

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store one acceptance verdict; all of them are printed at the end of the run."""

    def record(number: int, passed: bool, detail: str):
        _CRITERIA[number] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        passed, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def make_dataset(times, events, X=None):
    times = np.asarray(times, dtype=float)
    X = np.zeros((times.size, 1)) if X is None else np.asarray(X, dtype=float)
    return Dataset(X, times, events, tuple(f"x{i}" for i in range(X.shape[1])))
