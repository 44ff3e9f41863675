import time
from contextlib import contextmanager

import pytest

_RESULTS: list[str] = []


@pytest.fixture
def criterion(capsys):
    """Time a block, enforce its budget and log one PASS/FAIL line."""

    @contextmanager
    def run(label: str, budget: float | None = None):
        start = time.perf_counter()
        status, note = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            if budget is not None and elapsed >= budget:
                note = f" over budget {budget:.0f}s"
                raise AssertionError(f"{label}: took {elapsed:.1f}s, budget {budget:.0f}s")
            status = "PASS"
        except pytest.skip.Exception:
            status = "SKIP"
            raise
        finally:
            elapsed = time.perf_counter() - start
            line = f"[acceptance] {status} {label} ({elapsed:.2f}s){note}"
            _RESULTS.append(line)
            with capsys.disabled():
                print("\n" + line)

    return run


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
