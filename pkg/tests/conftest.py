"""Shared pytest plumbing.

The acceptance tests register one human-readable PASS/FAIL line each; this
hook replays them in the terminal summary so they are visible even under
pytest's default output capture.
"""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
