"""Shared pytest hooks: collect one pass/fail line per acceptance criterion."""

ACCEPTANCE_LINES = []


def record_acceptance(number, name, passed, detail):
    line = f"[acceptance {number}] {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
