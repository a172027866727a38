import time
from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


class _Check:
    detail = ""


@pytest.fixture
def criterion(request):
    """Context manager that times a criterion and records PASS/FAIL/REPORTED.

    ``gate=False`` records the outcome without failing the test.
    """
    results = request.config.stash[_RESULTS]

    @contextmanager
    def record(name, budget_s=None, gate=True):
        check = _Check()
        start = time.perf_counter()
        try:
            yield check
        except AssertionError as exc:
            results[name] = ("FAIL", f"{check.detail} {exc}".strip(), time.perf_counter() - start)
            raise
        elapsed = time.perf_counter() - start
        status = "PASS" if gate else "REPORTED"
        detail = check.detail
        if budget_s is not None and elapsed > budget_s:
            status, detail = "FAIL", f"{detail} (took {elapsed:.1f}s, budget {budget_s}s)"
        results[name] = (status, detail, elapsed)
        if status == "FAIL":
            pytest.fail(detail)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail, elapsed) in results.items():
        terminalreporter.write_line(f"{status:<8} {name} [{elapsed:.1f}s] {detail}")
