import pytest

from trigflow.values import FieldV

ACCEPTANCE: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the terminal summary."""
    def record(number: int, title: str):
        ACCEPTANCE[number] = (title, False)
        request.node.user_properties.append(("criterion", number))
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        for key, number in item.user_properties:
            if key == "criterion" and number in ACCEPTANCE:
                ACCEPTANCE[number] = (ACCEPTANCE[number][0], report.passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")


def field(values, dims=None):
    import numpy as np
    arr = np.asarray(values, dtype=float)
    return FieldV(dims or arr.shape, arr)
