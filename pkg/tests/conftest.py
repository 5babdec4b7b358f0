import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the release-gate verdict lines after capture ends."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "GATE_LINES", None) if mod else None
    if lines:
        terminalreporter.section("release gate")
        for line in lines:
            terminalreporter.write_line(line)
