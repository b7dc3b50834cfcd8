import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
