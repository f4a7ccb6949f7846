import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        details = "; ".join(detail for _, detail in checks)
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {details}")
