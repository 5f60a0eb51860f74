import pytest

_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Record ``(number, title, passed, detail)`` lines for the acceptance summary."""

    def record(number, title, passed, detail=""):
        _CRITERIA[number] = (title, passed, detail)
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}" + (f" :: {detail}" if detail else "")
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}" + (f" :: {detail}" if detail else "")
        )
