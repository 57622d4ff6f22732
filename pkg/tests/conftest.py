import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance line: record(n, passed, detail)."""
    def put(n, passed, detail):
        _ACCEPTANCE[n] = (passed, detail)
    return put


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
