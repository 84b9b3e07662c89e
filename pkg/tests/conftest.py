import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    outcomes = getattr(module, "OUTCOMES", None)
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines(outcomes):
        terminalreporter.write_line(line)
