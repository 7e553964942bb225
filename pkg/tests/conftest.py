import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(k, title, ok, detail)``; returns ``ok``."""

    def record(k, title, ok, detail=""):
        _RESULTS[k] = (title, bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {title} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        title, ok, detail = _RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {k}. {title}  {detail}")
