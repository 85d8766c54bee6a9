import pytest

_LINES: list[tuple[str, bool, str]] = []


class AcceptanceLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, criterion: str, passed: bool, detail: str) -> bool:
        _LINES.append((criterion, bool(passed), detail))
        print(f"{criterion}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_LINES, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}")
