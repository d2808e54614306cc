import pytest

SMALL_CONFIG = """\
# small configuration for fast end-to-end runs
torus.n_points = 300
noise.n_points = 300
train.epochs = 3
filtration.landmarks = 80
"""

_ACCEPTANCE_LINES = []


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(criterion: int, passed: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
