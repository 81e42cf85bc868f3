import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def report(request):
    """Record one acceptance verdict line; all lines are echoed in the terminal summary."""

    def emit(line):
        print(line)
        request.config._acceptance_lines.append(line)

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
