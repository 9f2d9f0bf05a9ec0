import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dol.model import make_model  # noqa: E402

_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def tanh2():
    return make_model(0.0, "tanh:2")


@pytest.fixture(scope="session")
def tanh1():
    return make_model(0.0, "tanh:1")


@contextmanager
def _criterion(num, title, limit=None):
    t0 = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - t0
        if limit is not None and elapsed > limit:
            raise AssertionError(f"runtime {elapsed:.2f}s exceeds {limit}s")
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        line = f"FAIL  criterion {num:>2}: {title} ({elapsed:.2f}s) -- {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
        _CRITERIA.append(line)
        print(line)
        raise
    line = f"PASS  criterion {num:>2}: {title} ({elapsed:.2f}s)"
    _CRITERIA.append(line)
    print(line)


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
