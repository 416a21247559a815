import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.acceptance_lines

    def record(number: int, title: str, checks: list[tuple[str, bool, str]]) -> bool:
        ok = all(passed for _, passed, _ in checks)
        lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}")
        for name, passed, detail in checks:
            lines.append(f"        {'ok  ' if passed else 'FAIL'} {name}: {detail}")
        print(lines[-len(checks) - 1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
