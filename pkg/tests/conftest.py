import re

from hypothesis import settings

# deterministic property-test runs so the suite is reproducible end to end
settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")

_criterion_lines: list[str] = []


def record_criterion(line: str) -> None:
    """Register an acceptance-criterion result for the end-of-run summary."""
    _criterion_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = list(_criterion_lines)
    for report in terminalreporter.stats.get("failed", []):
        match = re.search(r"test_a(\d+)", getattr(report, "nodeid", ""))
        if match:
            lines.append(f"A{match.group(1)} FAIL  {report.nodeid}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
