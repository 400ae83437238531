"""Shared test plumbing.

Acceptance tests register a one-line verdict per criterion; the lines are
echoed in the terminal summary so they are visible regardless of capture.
"""

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, slug: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    line = f"ACCEPTANCE {number} ({slug}): {verdict} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
