import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# verdict lines recorded by test_acceptance, re-emitted after the run so
# they are visible even though pytest captures test stdout
ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)
