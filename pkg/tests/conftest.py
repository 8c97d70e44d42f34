"""Shared pytest hooks.

The acceptance module records one verdict line per end-to-end criterion;
pytest's fd-level capture swallows direct writes from passing tests, so
the lines are replayed here in a terminal section after capture teardown.
That keeps the verdicts visible in piped runs (`pytest -v | tee ...`).
"""

_ACCEPTANCE_LINES: list = []


def record_acceptance_line(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
