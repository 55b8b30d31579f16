import pytest

_RESULTS = []


@pytest.fixture
def acceptance(request):
    """Record ``(ok, detail)`` for the acceptance summary and return ``ok``."""

    def record(label, ok, detail):
        _RESULTS.append((label, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_RESULTS, key=lambda r: int(r[0].split()[1].rstrip(":"))):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
